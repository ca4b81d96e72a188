#pragma once

// nlohmann::json conversions for the data model.

#include <json.hpp>

#include "regtune/instances.hpp"

namespace regtune {

using json = nlohmann::json;

json to_json_matrix(const Matrix& M);
json to_json_vector(const Vector& v);
Matrix matrix_from_json(const json& j);
Vector vector_from_json(const json& j);

json to_json(const Dataset& ds);
json to_json(const ProblemInstance& inst);
Dataset dataset_from_json(const json& j);
ProblemInstance instance_from_json(const json& j);

} // namespace regtune
