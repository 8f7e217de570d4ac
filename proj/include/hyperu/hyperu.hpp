#pragma once

#include "errors.hpp"
#include "random.hpp"
#include "parallel.hpp"
#include "numerics.hpp"
#include "geometry.hpp"
#include "tapers.hpp"
#include "transforms.hpp"
#include "estimator.hpp"
#include "covariance.hpp"
#include "inference.hpp"
#include "simulate.hpp"
#include "io.hpp"
