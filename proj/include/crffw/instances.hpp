#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "crffw/model.hpp"
#include "crffw/random.hpp"
#include "crffw/types.hpp"

namespace crffw {

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

enum class CompatKind { Potts, RandomSymmetric };

/// Fully connected Gaussian-kernel CRF on random pixel features. Draw
/// order: positions, colors, unaries, then compatibility entries.
/// Defaults put about one node per two square pixels, so each node has a
/// few dozen neighbours within the spatial bandwidth.
struct RandomDense {
  std::size_t n = 500;
  std::size_t d = 21;
  double image_size = 32.0;  ///< positions uniform in [0, image_size]^2
  KernelParams kernel{};
  CompatKind compat = CompatKind::Potts;
  double potts_w = 1.0;
  double unary_scale = 3.0;
  std::uint64_t seed = 0;
};

/// 4-connected grid with Potts edges.
struct RandomGrid {
  std::size_t rows = 8;
  std::size_t cols = 8;
  std::size_t d = 3;
  double potts_w = 1.0;
  double unary_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Erdos-Renyi graph; each present edge gets a d x d matrix with entries
/// uniform in [-1, 1].
struct RandomEdgeList {
  std::size_t n = 10;
  std::size_t d = 3;
  double edge_prob = 0.3;
  double unary_scale = 1.0;
  std::uint64_t seed = 0;
};

using GeneratorSpec = std::variant<RandomDense, RandomGrid, RandomEdgeList>;

namespace detail {

inline Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = scale * rng.normal();
  return m;
}

inline void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw InvalidArgument(std::string("generate: ") + what + " must be positive");
}

inline CrfInstance generate_one(const RandomDense& s) {
  require_positive(s.n, "n");
  require_positive(s.d, "d");
  if (!(s.image_size > 0.0)) throw InvalidArgument("generate: image_size must be positive");
  if (!std::isfinite(s.unary_scale)) throw InvalidArgument("generate: unary_scale must be finite");
  Rng rng(s.seed);
  const auto n = static_cast<Eigen::Index>(s.n);
  Matrix pos(n, 2);
  for (Eigen::Index k = 0; k < pos.size(); ++k) pos.data()[k] = rng.uniform(0.0, s.image_size);
  Matrix col(n, 3);
  for (Eigen::Index k = 0; k < col.size(); ++k) col.data()[k] = rng.uniform(0.0, 255.0);
  Matrix unary = normal_matrix(rng, s.n, s.d, s.unary_scale);
  Matrix mu;
  if (s.compat == CompatKind::Potts) {
    mu = potts_compatibility(s.d, s.potts_w);
  } else {
    const auto d = static_cast<Eigen::Index>(s.d);
    mu = Matrix(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = a; b < d; ++b) {
        mu(a, b) = rng.uniform(-1.0, 1.0);
        mu(b, a) = mu(a, b);
      }
    }
  }
  return CrfInstance(std::move(unary), GaussianKernel(std::move(pos), std::move(col), s.kernel, std::move(mu)));
}

inline CrfInstance generate_one(const RandomGrid& s) {
  require_positive(s.rows, "rows");
  require_positive(s.cols, "cols");
  require_positive(s.d, "d");
  Rng rng(s.seed);
  const std::size_t n = s.rows * s.cols;
  Matrix unary = normal_matrix(rng, n, s.d, s.unary_scale);
  const Matrix mu = potts_compatibility(s.d, s.potts_w);
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      const std::size_t i = r * s.cols + c;
      if (c + 1 < s.cols) edges.push_back({i, i + 1, mu});
      if (r + 1 < s.rows) edges.push_back({i, i + s.cols, mu});
    }
  }
  return CrfInstance(std::move(unary), EdgeList(std::move(edges), n, s.d));
}

inline CrfInstance generate_one(const RandomEdgeList& s) {
  require_positive(s.n, "n");
  require_positive(s.d, "d");
  if (!(s.edge_prob >= 0.0 && s.edge_prob <= 1.0)) throw InvalidArgument("generate: edge_prob must lie in [0, 1]");
  Rng rng(s.seed);
  Matrix unary = normal_matrix(rng, s.n, s.d, s.unary_scale);
  const auto d = static_cast<Eigen::Index>(s.d);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = i + 1; j < s.n; ++j) {
      if (rng.uniform() >= s.edge_prob) continue;
      Matrix theta(d, d);
      for (Eigen::Index k = 0; k < theta.size(); ++k) theta.data()[k] = rng.uniform(-1.0, 1.0);
      edges.push_back({i, j, std::move(theta)});
    }
  }
  return CrfInstance(std::move(unary), EdgeList(std::move(edges), s.n, s.d));
}

}  // namespace detail

/// Deterministic in the spec: the same spec always yields the same instance.
inline CrfInstance generate(const GeneratorSpec& spec) {
  return std::visit([](const auto& s) { return detail::generate_one(s); }, spec);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline constexpr int kJsonVersion = 1;

namespace detail {

using nlohmann::json;

inline json flat(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index k = 0; k < m.size(); ++k) a.push_back(m.data()[k]);
  return a;
}

inline const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  const auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + name + "'");
  return *it;
}

inline double number(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_number()) throw ParseError(where + ": field '" + name + "' must be a number");
  return v.get<double>();
}

inline std::size_t count(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw ParseError(where + ": field '" + name + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

inline Matrix matrix(const json& obj, const char* name, std::size_t rows, std::size_t cols, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_array()) throw ParseError(where + ": field '" + name + "' must be an array");
  if (v.size() != rows * cols) {
    throw ParseError(where + ": field '" + name + "' must have " + std::to_string(rows * cols) + " entries, found " +
                     std::to_string(v.size()));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) {
      throw ParseError(where + ": field '" + name + "' entry " + std::to_string(k) + " is not a number");
    }
    m.data()[k] = v[k].get<double>();
  }
  return m;
}

inline json to_json(const CrfInstance& inst) {
  json j;
  j["version"] = kJsonVersion;
  j["n"] = inst.n();
  j["d"] = inst.d();
  j["unary"] = flat(inst.unary());
  json pw;
  const auto& backend = inst.pairwise();
  if (const auto* dense = std::get_if<DenseMatrix>(&backend)) {
    pw["type"] = "dense";
    pw["matrix"] = flat(dense->matrix());
  } else if (const auto* list = std::get_if<EdgeList>(&backend)) {
    pw["type"] = "edges";
    json edges = json::array();
    for (const auto& e : list->edges()) edges.push_back({{"i", e.i}, {"j", e.j}, {"theta", flat(e.theta)}});
    pw["edges"] = std::move(edges);
  } else {
    const auto& gk = std::get<GaussianKernel>(backend);
    const auto& p = gk.params();
    pw["type"] = "gaussian";
    pw["positions"] = flat(gk.positions());
    pw["colors"] = flat(gk.colors());
    pw["w1"] = p.w1;
    pw["w2"] = p.w2;
    pw["alpha"] = p.alpha;
    pw["beta"] = p.beta;
    pw["gamma"] = p.gamma;
    pw["compat"] = flat(gk.compat());
  }
  j["pairwise"] = std::move(pw);
  if (inst.has_diagonal()) j["diagonal"] = flat(inst.diagonal());
  return j;
}

inline CrfInstance from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": top level must be an object");
  const json& version = field(j, "version", where);
  if (!version.is_number_integer() || version.get<long long>() != kJsonVersion) {
    throw UnsupportedError(where + ": unsupported version " + version.dump() + " (expected 1)");
  }
  const std::size_t n = count(j, "n", where);
  const std::size_t d = count(j, "d", where);
  Matrix unary = matrix(j, "unary", n, d, where);
  const json& pw = field(j, "pairwise", where);
  const std::string pw_where = where + ": pairwise";
  const json& type = field(pw, "type", pw_where);
  if (!type.is_string()) throw ParseError(pw_where + ": field 'type' must be a string");
  const std::string t = type.get<std::string>();

  auto build = [&]() -> PairwiseBackend {
    if (t == "dense") return DenseMatrix(matrix(pw, "matrix", n * d, n * d, pw_where), n, d);
    if (t == "edges") {
      const json& arr = field(pw, "edges", pw_where);
      if (!arr.is_array()) throw ParseError(pw_where + ": field 'edges' must be an array");
      std::vector<Edge> edges;
      edges.reserve(arr.size());
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string ew = pw_where + ": edges[" + std::to_string(k) + "]";
        const json& ij = field(arr[k], "i", ew);
        const json& jj = field(arr[k], "j", ew);
        if (!ij.is_number_unsigned() || !jj.is_number_unsigned()) {
          throw ParseError(ew + ": fields 'i' and 'j' must be node indices");
        }
        edges.push_back({ij.get<std::size_t>(), jj.get<std::size_t>(), matrix(arr[k], "theta", d, d, ew)});
      }
      return EdgeList(std::move(edges), n, d);
    }
    if (t == "gaussian") {
      KernelParams p;
      p.w1 = number(pw, "w1", pw_where);
      p.w2 = number(pw, "w2", pw_where);
      p.alpha = number(pw, "alpha", pw_where);
      p.beta = number(pw, "beta", pw_where);
      p.gamma = number(pw, "gamma", pw_where);
      return GaussianKernel(matrix(pw, "positions", n, 2, pw_where), matrix(pw, "colors", n, 3, pw_where), p,
                            matrix(pw, "compat", d, d, pw_where));
    }
    throw ParseError(pw_where + ": unknown type '" + t + "'");
  };

  try {
    PairwiseBackend backend = build();
    if (j.contains("diagonal")) {
      return CrfInstance(std::move(unary), std::move(backend), matrix(j, "diagonal", n, d, where));
    }
    return CrfInstance(std::move(unary), std::move(backend));
  } catch (const InvalidArgument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

}  // namespace detail

inline std::string to_json_string(const CrfInstance& inst) { return detail::to_json(inst).dump(); }

inline CrfInstance from_json_string(const std::string& text, const std::string& where = "json") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
  return detail::from_json(j, where);
}

/// Doubles are written in shortest round-trip form, so reading back yields
/// bit-identical values.
inline void write_json(const CrfInstance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_json: cannot open " + path);
  out << to_json_string(inst) << '\n';
  if (!out) throw std::runtime_error("write_json: write failed for " + path);
}

inline CrfInstance read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_json: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str(), path);
}

// ---------------------------------------------------------------------------
// UAI (MARKOV, unary and pairwise factors)
// ---------------------------------------------------------------------------

inline constexpr double kUaiProbabilityFloor = 1e-300;

namespace detail {

class UaiTokens {
 public:
  UaiTokens(std::istream& in, std::string where) : in_(in), where_(std::move(where)) {}

  std::string word(const char* what) {
    std::string t;
    if (!(in_ >> t)) throw ParseError(where_ + ": unexpected end of file while reading " + what);
    ++index_;
    return t;
  }

  std::size_t integer(const char* what) {
    const std::string t = word(what);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != t.size() || t.front() == '-') fail(what, t);
    return static_cast<std::size_t>(v);
  }

  double real(const char* what) {
    const std::string t = word(what);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != t.size() || !std::isfinite(v)) fail(what, t);
    return v;
  }

  const std::string& where() const { return where_; }

 private:
  [[noreturn]] void fail(const char* what, const std::string& t) const {
    throw ParseError(where_ + ": token " + std::to_string(index_) + " ('" + t + "') is not a valid " + what);
  }

  std::istream& in_;
  std::string where_;
  std::size_t index_ = 0;
};

}  // namespace detail

/// Converts a pairwise MARKOV network to an EdgeList instance with
/// theta = -log max(phi, 1e-300). Tables on the same scope are multiplied
/// before conversion; the last scope variable varies fastest. Factors with
/// an empty scope only shift the energy by a constant and are dropped.
inline CrfInstance read_uai(std::istream& in, const std::string& where = "uai") {
  detail::UaiTokens tok(in, where);
  const std::string type = tok.word("network type");
  if (type != "MARKOV") throw UnsupportedError(where + ": network type '" + type + "' (only MARKOV)");
  const std::size_t n = tok.integer("variable count");
  if (n == 0) throw ParseError(where + ": variable count must be positive");
  std::size_t d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = tok.integer("cardinality");
    if (c == 0) throw ParseError(where + ": cardinality of variable " + std::to_string(i) + " is zero");
    if (i == 0) d = c;
    if (c != d) throw UnsupportedError(where + ": non-uniform cardinalities");
  }
  const std::size_t m = tok.integer("factor count");
  std::vector<std::vector<std::size_t>> scopes(m);
  for (std::size_t f = 0; f < m; ++f) {
    const std::size_t arity = tok.integer("scope size");
    if (arity > 2) {
      throw UnsupportedError(where + ": factor " + std::to_string(f) + " has arity " + std::to_string(arity) +
                             " (only unary and pairwise)");
    }
    for (std::size_t a = 0; a < arity; ++a) {
      const std::size_t v = tok.integer("variable index");
      if (v >= n) throw ParseError(where + ": factor " + std::to_string(f) + " references variable " + std::to_string(v));
      scopes[f].push_back(v);
    }
    if (arity == 2 && scopes[f][0] == scopes[f][1]) {
      throw ParseError(where + ": factor " + std::to_string(f) + " repeats a variable");
    }
  }

  const auto dd = static_cast<Eigen::Index>(d);
  Matrix unary_phi = Matrix::Ones(static_cast<Eigen::Index>(n), dd);
  std::map<std::pair<std::size_t, std::size_t>, Matrix> pair_phi;
  for (std::size_t f = 0; f < m; ++f) {
    const auto& sc = scopes[f];
    std::size_t expected = 1;
    for (std::size_t a = 0; a < sc.size(); ++a) expected *= d;
    const std::size_t entries = tok.integer("table size");
    if (entries != expected) {
      throw ParseError(where + ": factor " + std::to_string(f) + " table has " + std::to_string(entries) +
                       " entries, expected " + std::to_string(expected));
    }
    std::vector<double> table(entries);
    for (auto& v : table) {
      v = tok.real("table entry");
      if (v < 0.0) throw ParseError(where + ": factor " + std::to_string(f) + " has a negative entry");
    }
    if (sc.size() == 1) {
      for (Eigen::Index s = 0; s < dd; ++s) unary_phi(static_cast<Eigen::Index>(sc[0]), s) *= table[static_cast<std::size_t>(s)];
    } else if (sc.size() == 2) {
      Matrix t(dd, dd);
      for (std::size_t k = 0; k < entries; ++k) t.data()[k] = table[k];
      std::size_t a = sc[0];
      std::size_t b = sc[1];
      if (a > b) {
        std::swap(a, b);
        t.transposeInPlace();
      }
      auto [it, inserted] = pair_phi.try_emplace({a, b}, Matrix::Ones(dd, dd));
      it->second = it->second.cwiseProduct(t);
    }
  }

  auto to_theta = [](const Matrix& phi) {
    return phi.unaryExpr([](double p) { return -std::log(std::max(p, kUaiProbabilityFloor)); }).eval();
  };
  std::vector<Edge> edges;
  edges.reserve(pair_phi.size());
  for (const auto& [key, phi] : pair_phi) edges.push_back({key.first, key.second, to_theta(phi)});
  return CrfInstance(to_theta(unary_phi), EdgeList(std::move(edges), n, d));
}

inline CrfInstance read_uai(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_uai: cannot open " + path);
  return read_uai(in, path);
}

}  // namespace crffw
