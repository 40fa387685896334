// JSON encodings for the core types.
//
// Fn              {"values": [...]}
// Meas            {"masses": [...]}
// Kernel          {"rows": [[...], ...]}            (source size = row length)
// GeneralOperator {"matrix": [[...], ...], "source_norm": "sup|euclid|p:<x>",
//                  "target_norm": ...}
// BpbCertificate  {"witness": [...], "attained_norm": ..., "dist_point": ...,
//                  "dist_operator": ..., "epsilon": ..., "tol": ...}

#pragma once

#include <json.hpp>

#include <string>

#include "bpb/core.hpp"

namespace bpb {

using json = nlohmann::json;

void to_json(json& j, const Fn& f);
void from_json(const json& j, Fn& f);

void to_json(json& j, const Meas& m);
void from_json(const json& j, Meas& m);

void to_json(json& j, const Kernel& k);
void from_json(const json& j, Kernel& k);

void to_json(json& j, const GeneralOperator& a);
void from_json(const json& j, GeneralOperator& a);

void to_json(json& j, const BpbCertificate& c);
void from_json(const json& j, BpbCertificate& c);

// Reads and parses a JSON document; throws std::runtime_error on I/O failure.
json load_json_file(const std::string& path);

// Writes `j` with two-space indentation and a trailing newline.
void save_json_file(const std::string& path, const json& j);

}  // namespace bpb
