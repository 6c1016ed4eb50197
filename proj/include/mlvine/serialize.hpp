#pragma once

#include "mlvine/joint.hpp"

#include <json.hpp>

#include <memory>
#include <string>

namespace mlv {

using Json = nlohmann::ordered_json;

Json marginal_to_json(const Marginal& m);
std::unique_ptr<Marginal> marginal_from_json(const Json& j);

Json vine_to_json(const DVineModel& v);
DVineModel vine_from_json(const Json& j);

/// Outcomes (marginal + vine) and the cross correlation matrix.
Json model_to_json(const JointModel& m);
/// Throws DataError on a malformed document.
JointModel model_from_json(const Json& j);

/// Parameter table, selections, AIC tables and diagnostics. Timings are
/// left out so that reruns produce identical documents.
Json report_to_json(const StagewiseFit& fit);

JointModel read_model(const std::string& path);

}  // namespace mlv
