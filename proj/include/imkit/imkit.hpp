#pragma once

#include "imkit/association.hpp"
#include "imkit/catalog/brownian.hpp"
#include "imkit/catalog/gaussian.hpp"
#include "imkit/characteristics.hpp"
#include "imkit/distributions.hpp"
#include "imkit/engine.hpp"
#include "imkit/errors.hpp"
#include "imkit/expression.hpp"
#include "imkit/parallel.hpp"
#include "imkit/prs.hpp"
#include "imkit/regularity.hpp"
