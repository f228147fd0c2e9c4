#pragma once

#include <sbm/bp.hpp>
#include <sbm/channel.hpp>
#include <sbm/io.hpp>
#include <sbm/linalg.hpp>
#include <sbm/model.hpp>
#include <sbm/oracle.hpp>
#include <sbm/potential.hpp>
#include <sbm/quadrature.hpp>
#include <sbm/rng.hpp>
#include <sbm/sweep.hpp>
