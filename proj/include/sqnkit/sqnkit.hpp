#pragma once

#include "sqnkit/blockhess.hpp"
#include "sqnkit/checks.hpp"
#include "sqnkit/common.hpp"
#include "sqnkit/dataset.hpp"
#include "sqnkit/io.hpp"
#include "sqnkit/lbfgs.hpp"
#include "sqnkit/problem.hpp"
#include "sqnkit/reference.hpp"
#include "sqnkit/rng.hpp"
#include "sqnkit/sampling.hpp"
#include "sqnkit/solver.hpp"
#include "sqnkit/svrg.hpp"
#include "sqnkit/theory.hpp"
