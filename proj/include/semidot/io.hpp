#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "semidot/dynamic_transport.hpp"
#include "semidot/jko.hpp"
#include "semidot/pde_flow.hpp"
#include "semidot/static_transport.hpp"

namespace semidot::io {

using nlohmann::json;

// {"nodes": [...], "K": [[...]]}
json graph_to_json(const WeightedGraph& graph);
WeightedGraph graph_from_json(const json& j);

// per-node columns
json field_to_json(const Field& f);
Field field_from_json(const json& j, int points, int nodes);

// plans as dense row-major arrays, h per cell as the upper triangle (g < g')
json pair_to_json(const AdmissiblePair& pair, const std::vector<std::string>& node_names);
AdmissiblePair pair_from_json(const json& j, int points, int nodes);

json barrier_to_json(const BarrierReport& b);
json jko_diagnostics_to_json(const JkoDiagnostics& d);

// point, x_0..x_{d-1}, node, value
std::string field_csv(const Field& f, const GridDomain& domain, const std::vector<std::string>& names,
                      const std::string& value_name = "f");
// Reads the layout written by field_csv.
Field field_from_csv(const std::string& text, const GridDomain& domain, const std::vector<std::string>& names);
// t, point, x..., node, f
std::string densities_csv(const std::vector<double>& times, const std::vector<Field>& densities, const GridDomain& domain,
                          const std::vector<std::string>& names);
// t, point, x..., node, f, phi (phi of the interval starting at t; empty on the last row block)
std::string path_csv(const DiscretePath& path, const GridDomain& domain, const std::vector<std::string>& names);

std::string read_file(const std::string& path);
// write to a temporary sibling then rename
void write_atomic(const std::string& path, const std::string& content);

} // namespace semidot::io
