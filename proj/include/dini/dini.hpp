#pragma once

#include "dini/adjoint.hpp"
#include "dini/coefficients.hpp"
#include "dini/counterexamples.hpp"
#include "dini/error.hpp"
#include "dini/experiments.hpp"
#include "dini/fdsolver.hpp"
#include "dini/gauss_kronrod.hpp"
#include "dini/grid.hpp"
#include "dini/io.hpp"
#include "dini/moduli.hpp"
#include "dini/quadrature.hpp"
#include "dini/report.hpp"
#include "dini/sparse.hpp"
#include "dini/svg.hpp"
#include "dini/verdict.hpp"
