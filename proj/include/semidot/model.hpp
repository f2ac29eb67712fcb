#pragma once

#include "semidot/domain.hpp"
#include "semidot/graph.hpp"
#include "semidot/mobility.hpp"

namespace semidot {

// Everything a solver needs to know about the semi-discrete space and energy.
struct Model {
    GridDomain domain;
    WeightedGraph graph;
    PotentialPair pot;
    Mobility mob;

    int points() const { return domain.num_points(); }
    int nodes() const { return graph.size(); }
};

// Checks that grid, graph, potentials and mobility agree in shape.
void validate_model(const Model& model);

} // namespace semidot
