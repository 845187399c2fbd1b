#pragma once

#include "llmcomm/adapter.hpp"
#include "llmcomm/costmodel.hpp"
#include "llmcomm/error.hpp"
#include "llmcomm/format.hpp"
#include "llmcomm/lifecycle.hpp"
#include "llmcomm/metrics.hpp"
#include "llmcomm/netsim.hpp"
#include "llmcomm/protocol.hpp"
#include "llmcomm/responder.hpp"
#include "llmcomm/runner.hpp"
#include "llmcomm/scenario.hpp"
#include "llmcomm/simulator.hpp"
#include "llmcomm/workload.hpp"
