#pragma once

#include "tieflow/case.hpp"
#include "tieflow/dispatch.hpp"
#include "tieflow/distribution.hpp"
#include "tieflow/errors.hpp"
#include "tieflow/netmodel.hpp"
#include "tieflow/oracle.hpp"
#include "tieflow/qp.hpp"
#include "tieflow/report.hpp"
#include "tieflow/scheduler.hpp"
#include "tieflow/stochastic.hpp"
