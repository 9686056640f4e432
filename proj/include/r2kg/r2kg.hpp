#pragma once

#include "r2kg/action.hpp"
#include "r2kg/dataset.hpp"
#include "r2kg/fact.hpp"
#include "r2kg/gateway.hpp"
#include "r2kg/harness.hpp"
#include "r2kg/kg_store.hpp"
#include "r2kg/metrics.hpp"
#include "r2kg/orchestrator.hpp"
#include "r2kg/prompt.hpp"
#include "r2kg/session.hpp"
#include "r2kg/text.hpp"
