#include "semidot/model.hpp"

#include <sstream>

#include "semidot/error.hpp"

namespace semidot {

void validate_model(const Model& model) {
    const int N = model.points(), m = model.nodes();
    std::ostringstream os;
    if (model.pot.V.rows() != N || model.pot.V.cols() != m)
        os << "V is " << model.pot.V.rows() << "x" << model.pot.V.cols() << ", expected " << N << "x" << m << ". ";
    if (model.pot.W.size() != N) os << "W has " << model.pot.W.size() << " points, expected " << N << ". ";
    if (model.mob.num_points() != N) os << "mobility defined on " << model.mob.num_points() << " points. ";
    if (model.mob.kind() == Mobility::Kind::LogMeanScaled && model.mob.V().cols() != m)
        os << "log-mean mobility has " << model.mob.V().cols() << " nodes. ";
    if (!os.str().empty()) throw Error(ErrorKind::SizeMismatch, os.str());
}

} // namespace semidot
