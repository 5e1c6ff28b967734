#pragma once

#include "prospect/audit.hpp"
#include "prospect/cells.hpp"
#include "prospect/error.hpp"
#include "prospect/estimation.hpp"
#include "prospect/io.hpp"
#include "prospect/joint_table.hpp"
#include "prospect/metrics.hpp"
#include "prospect/numeric.hpp"
#include "prospect/policy.hpp"
#include "prospect/schema.hpp"
#include "prospect/toy.hpp"
#include "prospect/transport.hpp"
