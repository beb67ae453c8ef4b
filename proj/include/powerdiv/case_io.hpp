#pragma once

#include <string>
#include <string_view>

#include "powerdiv/network.hpp"

namespace powerdiv {

enum class CaseFormat { Native, Matpower };

/// Native JSON case:
///
///   {"base_mva": 100,
///    "buses": [{"id": 1, "kind": "slack|pv|pq", "p": 0, "q": 0, "vm": 1.04,
///               "shunt_g": 0, "shunt_b": 0}],
///    "lines": [{"from": 1, "to": 2, "g": 1.3, "b": -11.6, "sh_g": 0, "sh_b": 0.088,
///               "tap": 1.0}]}
///
/// Everything is per-unit except base_mva. `vm`, `shunt_g`, `shunt_b` and `tap`
/// are optional. `sh_g`/`sh_b` is the shunt at each end of the line.
NetworkCase parse_native(std::string_view text);

/// MATPOWER-style `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch` tables.
/// Branch r + jx becomes y = 1/(r + jx); total charging b becomes j b/2 per end.
/// Off-nominal tap ratios are kept; nonzero phase shifts are rejected.
NetworkCase parse_matpower(std::string_view text);

NetworkCase parse_case(std::string_view text, CaseFormat format);

/// Reads and parses a file. Throws Error{Io} if it cannot be read.
NetworkCase load_case(const std::string& path, CaseFormat format);

/// Native JSON with round-trip precision; parse_native(serialize_native(c)) == c.
std::string serialize_native(const NetworkCase& net);

}  // namespace powerdiv
