#pragma once

#include <json.hpp>

#include "pburg/equations.hpp"
#include "pburg/groupoid.hpp"
#include "pburg/transforms.hpp"

namespace pburg {

/// Flat key-value documents for parameter records, e.g.
///   {"group":"p3","alpha":2,"kappa":1,"F2":{"kind":"quadratic"}}.
/// Group names are the CLI spellings (usual-pot, p3, p2, p2-linear, c-usual,
/// c2, gbe), matched case-insensitively. Unknown or missing keys raise
/// ParamError naming the offending fields.
nlohmann::json to_json(const AnyParams& p);
AnyParams params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Jet2& jet);
nlohmann::json to_json(const VerificationReport& rep);
nlohmann::json to_json(const EquivalenceResult& res);

Family family_from_string(const std::string& s);

}  // namespace pburg
