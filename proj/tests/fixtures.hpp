#pragma once

#include "llmcomm/netsim.hpp"

namespace fixtures {

using llmcomm::net::Link;
using llmcomm::net::LinkClass;
using llmcomm::net::NodeKind;
using llmcomm::net::Topology;

// devA-edge1, devB-edge2, devC-dc; edge1-dc, edge2-dc.
inline Topology three_user(double access_latency = 0.005, double core_latency = 0.02) {
  Topology t;
  for (auto d : {"devA", "devB", "devC"}) t.add_node(d, NodeKind::device);
  t.add_node("edge1", NodeKind::edge);
  t.add_node("edge2", NodeKind::edge);
  t.add_node("dc", NodeKind::datacenter);
  t.add_link({"devA", "edge1", access_latency, 1e8, LinkClass::access});
  t.add_link({"devB", "edge2", access_latency, 1e8, LinkClass::access});
  t.add_link({"devC", "dc", access_latency, 1e8, LinkClass::access});
  t.add_link({"edge1", "dc", core_latency, 1e10, LinkClass::core});
  t.add_link({"edge2", "dc", core_latency, 1e10, LinkClass::core});
  return t;
}

}  // namespace fixtures

#include <json.hpp>

#include "llmcomm/scenario.hpp"

namespace fixtures {

inline nlohmann::json scenario_doc(const std::string& name) {
  return llmcomm::read_json_file(std::string(LLMCOMM_SCENARIO_DIR) + "/" + name);
}

// Three-user topology with users A, B, C and no flows; C owns a small model at dc.
inline nlohmann::json small_doc() {
  return nlohmann::json::parse(R"({
    "seed": 1,
    "duration_s": 1000,
    "topology": {
      "nodes": [
        {"id": "devA", "kind": "device"}, {"id": "devB", "kind": "device"}, {"id": "devC", "kind": "device"},
        {"id": "edge1", "kind": "edge"}, {"id": "edge2", "kind": "edge"}, {"id": "dc", "kind": "datacenter"}
      ],
      "links": [
        {"a": "devA", "b": "edge1", "latency_s": 0.005, "bandwidth_bps": 1e8, "class": "access"},
        {"a": "devB", "b": "edge2", "latency_s": 0.005, "bandwidth_bps": 1e8, "class": "access"},
        {"a": "devC", "b": "dc", "latency_s": 0.005, "bandwidth_bps": 1e8, "class": "access"},
        {"a": "edge1", "b": "dc", "latency_s": 0.02, "bandwidth_bps": 1e10, "class": "core"},
        {"a": "edge2", "b": "dc", "latency_s": 0.02, "bandwidth_bps": 1e10, "class": "core"}
      ]
    },
    "users": [
      {"id": "A", "attach": "devA"},
      {"id": "B", "attach": "devB"},
      {"id": "C", "attach": "devC",
       "model": {"size_bytes": 1000000, "facts": {"lunch": {"response": "Noon", "visibility": "public"}}}}
    ],
    "flows": []
  })");
}

}  // namespace fixtures
