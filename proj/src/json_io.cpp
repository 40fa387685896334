#include "bpb/json_io.hpp"

#include <fstream>

namespace bpb {

void to_json(json& j, const Fn& f) { j = json{{"values", f.values}}; }

void from_json(const json& j, Fn& f) { j.at("values").get_to(f.values); }

void to_json(json& j, const Meas& m) { j = json{{"masses", m.masses}}; }

void from_json(const json& j, Meas& m) { j.at("masses").get_to(m.masses); }

void to_json(json& j, const Kernel& k) {
  json rows = json::array();
  for (const Meas& r : k.rows) rows.push_back(r.masses);
  j = json{{"rows", std::move(rows)}};
}

void from_json(const json& j, Kernel& k) {
  k.rows.clear();
  for (const json& row : j.at("rows")) {
    Meas m;
    row.get_to(m.masses);
    k.rows.push_back(std::move(m));
  }
  k.source_dim = k.rows.empty() ? 0 : k.rows[0].dim();
  k.validate();
}

void to_json(json& j, const GeneralOperator& a) {
  j = json{{"matrix", a.matrix},
           {"source_norm", a.source_norm.str()},
           {"target_norm", a.target_norm.str()}};
}

void from_json(const json& j, GeneralOperator& a) {
  j.at("matrix").get_to(a.matrix);
  a.source_norm = NormTag::parse(j.at("source_norm").get<std::string>());
  a.target_norm = NormTag::parse(j.at("target_norm").get<std::string>());
  a.validate();
}

void to_json(json& j, const BpbCertificate& c) {
  j = json{{"witness", c.witness},
           {"attained_norm", c.attained_norm},
           {"dist_point", c.dist_point},
           {"dist_operator", c.dist_operator},
           {"epsilon", c.epsilon},
           {"tol", c.tol}};
}

void from_json(const json& j, BpbCertificate& c) {
  j.at("witness").get_to(c.witness);
  j.at("attained_norm").get_to(c.attained_norm);
  j.at("dist_point").get_to(c.dist_point);
  j.at("dist_operator").get_to(c.dist_operator);
  j.at("epsilon").get_to(c.epsilon);
  j.at("tol").get_to(c.tol);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  json j;
  in >> j;
  return j;
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace bpb
