#include "madmm/problem_io.hpp"

#include <fstream>

namespace madmm {

namespace {

using nlohmann::json;

Vector read_vector(const json& node, Index expected, const std::string& what) {
  if (!node.is_array()) throw StructuralError(what + " must be an array");
  if (static_cast<Index>(node.size()) != expected) {
    throw StructuralError(what + " has " + std::to_string(node.size()) + " entries, expected " +
                          std::to_string(expected));
  }
  Vector v(expected);
  for (Index i = 0; i < expected; ++i) {
    const json& e = node[static_cast<std::size_t>(i)];
    if (!e.is_number()) throw StructuralError(what + " must contain numbers only");
    v[i] = e.get<double>();
  }
  return v;
}

Matrix read_matrix(const json& node, Index rows, Index cols, const std::string& what) {
  const Vector flat = read_vector(node, rows * cols, what);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = flat[i * cols + j];
  }
  return m;
}

Index read_dim(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_integer()) {
    throw StructuralError(std::string("problem document needs an integer \"") + key + "\"");
  }
  const auto v = doc[key].get<long long>();
  if (v < 1) throw StructuralError(std::string("\"") + key + "\" must be positive");
  return static_cast<Index>(v);
}

json flat(const Matrix& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

json flat(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

ProblemDocument problem_from_json(const json& doc) {
  if (!doc.is_object()) throw StructuralError("problem document must be a JSON object");
  if (!doc.contains("objective") || !doc["objective"].is_object()) {
    throw StructuralError("problem document needs an \"objective\" object");
  }
  const json& obj = doc["objective"];
  const std::string kind = obj.value("kind", "");
  ProblemDocument out;
  out.name = doc.value("name", kind == "l1_tv" ? "l1-tv-ct" : "json-problem");

  if (kind == "l1_tv") {
    CtSpec spec;
    spec.side = obj.value("image_size", spec.side);
    spec.views = obj.value("angles", spec.views);
    spec.detectors = obj.value("detectors", spec.detectors);
    spec.tv_weight = obj.value("tv_weight", spec.tv_weight);
    spec.noise_fraction = obj.value("noise_fraction", spec.noise_fraction);
    spec.seed = obj.value("seed", spec.seed);
    spec.spokes = obj.value("spokes", spec.spokes);
    out.ct = spec;
    return out;
  }
  if (kind != "quadratic") {
    throw StructuralError("unknown objective kind \"" + kind + "\" (valid: quadratic, l1_tv)");
  }

  const Index m = read_dim(doc, "m");
  const Index n = read_dim(doc, "n");
  if (!doc.contains("blocks") || !doc["blocks"].is_array() || doc["blocks"].empty()) {
    throw StructuralError("problem document needs a non-empty \"blocks\" array");
  }
  MulticonstraintProblem p;
  p.name = out.name;
  p.m = m;
  p.n = n;
  p.f = QuadraticObjective{read_matrix(obj.at("q_matrix"), m, m, "q_matrix"),
                           read_vector(obj.at("q_vector"), m, "q_vector")};
  p.g = QuadraticObjective{read_matrix(obj.at("r_matrix"), n, n, "r_matrix"),
                           read_vector(obj.at("r_vector"), n, "r_vector")};
  for (std::size_t j = 0; j < doc["blocks"].size(); ++j) {
    const json& blk = doc["blocks"][j];
    const std::string tag = "blocks[" + std::to_string(j) + "]";
    if (!blk.contains("c") || !blk["c"].is_array() || blk["c"].empty()) {
      throw StructuralError(tag + " needs a non-empty \"c\" array");
    }
    const auto rows = static_cast<Index>(blk["c"].size());
    p.blocks.emplace_back(read_matrix(blk.at("a"), rows, m, tag + ".a"), read_matrix(blk.at("b"), rows, n, tag + ".b"),
                          read_vector(blk["c"], rows, tag + ".c"));
  }
  p.validate();
  out.quadratic = std::move(p);
  return out;
}

ProblemDocument load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open problem file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw StructuralError("problem file " + path + " is not valid JSON: " + e.what());
  }
  return problem_from_json(doc);
}

json problem_to_json(const MulticonstraintProblem& problem) {
  if (!problem.is_quadratic() || !problem.is_dense()) {
    throw StructuralError("only dense quadratic problems serialize to JSON");
  }
  const auto& fq = std::get<QuadraticObjective>(problem.f);
  const auto& gq = std::get<QuadraticObjective>(problem.g);
  json doc;
  doc["name"] = problem.name;
  doc["m"] = problem.m;
  doc["n"] = problem.n;
  doc["objective"] = {{"kind", "quadratic"},
                      {"q_matrix", flat(fq.hessian)},
                      {"q_vector", flat(fq.linear)},
                      {"r_matrix", flat(gq.hessian)},
                      {"r_vector", flat(gq.linear)}};
  doc["blocks"] = json::array();
  for (const auto& blk : problem.blocks) {
    doc["blocks"].push_back({{"a", flat(blk.a.dense())}, {"b", flat(blk.b.dense())}, {"c", flat(blk.c)}});
  }
  return doc;
}

json ct_spec_to_json(const CtSpec& spec) {
  return {{"name", "l1-tv-ct"},
          {"objective",
           {{"kind", "l1_tv"},
            {"image_size", spec.side},
            {"angles", spec.views},
            {"detectors", spec.resolved_detectors()},
            {"tv_weight", spec.tv_weight},
            {"noise_fraction", spec.noise_fraction},
            {"seed", spec.seed},
            {"spokes", spec.spokes}}}};
}

}  // namespace madmm
