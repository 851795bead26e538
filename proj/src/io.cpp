#include "sqlp/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace sqlp::io {

using nlohmann::json;

ParseError::ParseError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                  : message),
      line_(line) {}

namespace {

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

[[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, 0); }

double number_at(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  return v.get<double>();
}

Index index_at(const json& v, Index dim, const std::string& where) {
  if (!v.is_number_integer()) fail(where + ": expected an integer index");
  const auto i = v.get<long long>();
  if (i < 1 || i > dim) {
    fail(where + ": index " + std::to_string(i) + " outside 1.." + std::to_string(dim));
  }
  return static_cast<Index>(i - 1);
}

Matrix read_payload(const json& v, const BlockSpec& s, const std::string& where,
                    std::vector<std::string>* warnings) {
  if (!v.is_array()) fail(where + ": expected an array");
  if (s.kind != ConeKind::Sdp) {
    if (static_cast<Index>(v.size()) != s.dim) {
      fail(where + ": expected " + std::to_string(s.dim) + " entries, found " +
           std::to_string(v.size()));
    }
    Matrix out(s.dim, 1);
    for (Index i = 0; i < s.dim; ++i) {
      out(i, 0) = number_at(v[static_cast<std::size_t>(i)], where);
    }
    return out;
  }
  // key (i <= j) -> (value, given transposed)
  std::map<std::pair<Index, Index>, std::pair<double, bool>> entries;
  for (const auto& t : v) {
    if (!t.is_array() || t.size() != 3) fail(where + ": expected [i, j, value] triplets");
    Index i = index_at(t[0], s.dim, where);
    Index j = index_at(t[1], s.dim, where);
    const double val = number_at(t[2], where);
    const bool flipped = i > j;
    if (flipped) std::swap(i, j);
    auto [it, fresh] = entries.try_emplace({i, j}, val, flipped);
    if (fresh) continue;
    if (it->second.second != flipped && i != j) {
      if (it->second.first != val) {
        fail(where + ": entries (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
             ") and its transpose disagree");
      }
      continue;
    }
    if (warnings) {
      warnings->push_back(where + ": duplicate entry (" + std::to_string(i + 1) + "," +
                          std::to_string(j + 1) + "), last value kept");
    }
    it->second = {val, flipped};
  }
  Matrix out = Matrix::Zero(s.dim, s.dim);
  for (const auto& [key, val] : entries) {
    out(key.first, key.second) = val.first;
    out(key.second, key.first) = val.first;
  }
  return out;
}

json write_payload(const Matrix& v, const BlockSpec& s) {
  json out = json::array();
  if (s.kind != ConeKind::Sdp) {
    for (Index i = 0; i < v.rows(); ++i) out.push_back(v(i, 0));
    return out;
  }
  for (Index j = 0; j < v.cols(); ++j) {
    for (Index i = 0; i <= j; ++i) {
      if (v(i, j) != 0.0) out.push_back(json::array({i + 1, j + 1, v(i, j)}));
    }
  }
  return out;
}

}  // namespace

ProblemData parse_native(std::string_view text, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    std::string msg = e.what();
    throw ParseError("syntax error: " + msg, line_of_offset(text, at));
  }
  if (!doc.is_object()) fail("top level must be an object");
  for (const char* key : {"blocks", "b", "C", "A"}) {
    if (!doc.contains(key)) fail(std::string("missing field \"") + key + "\"");
  }

  ProblemData p;
  const json& blocks = doc["blocks"];
  if (!blocks.is_array()) fail("\"blocks\": expected an array");
  if (blocks.empty()) fail("\"blocks\": problem has no blocks");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const json& bj = blocks[k];
    const std::string where = "blocks[" + std::to_string(k) + "]";
    if (!bj.is_object() || !bj.contains("kind") || !bj.contains("dim")) {
      fail(where + ": expected {kind, dim}");
    }
    if (!bj["kind"].is_string()) fail(where + ".kind: expected a string");
    const auto kind = parse_cone_kind(bj["kind"].get<std::string>());
    if (!kind) fail(where + ".kind: unknown cone \"" + bj["kind"].get<std::string>() + "\"");
    if (!bj["dim"].is_number_integer() || bj["dim"].get<long long>() < 1) {
      fail(where + ".dim: expected a positive integer");
    }
    BlockSpec s{*kind, static_cast<Index>(bj["dim"].get<long long>()), 0.0};
    if (bj.contains("barrier")) s.barrier = number_at(bj["barrier"], where + ".barrier");
    p.specs.push_back(s);
  }

  const json& b = doc["b"];
  if (!b.is_array()) fail("\"b\": expected an array");
  p.m = static_cast<Index>(b.size());
  p.b.resize(p.m);
  for (Index k = 0; k < p.m; ++k) p.b(k) = number_at(b[static_cast<std::size_t>(k)], "b");

  const json& c = doc["C"];
  const json& a = doc["A"];
  if (!c.is_array() || c.size() != p.specs.size()) {
    fail("\"C\": expected one entry per block (" + std::to_string(p.specs.size()) + ")");
  }
  if (!a.is_array() || a.size() != p.specs.size()) {
    fail("\"A\": expected one entry per block (" + std::to_string(p.specs.size()) + ")");
  }
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    p.c.blocks.push_back(read_payload(c[k], s, "C[" + std::to_string(k) + "]", warnings));
    const json& ak = a[k];
    if (!ak.is_array() || static_cast<Index>(ak.size()) != p.m) {
      fail("A[" + std::to_string(k) + "]: expected m = " + std::to_string(p.m) +
           " coefficient entries");
    }
    Matrix at(vec_length(s), p.m);
    for (Index j = 0; j < p.m; ++j) {
      const std::string where = "A[" + std::to_string(k) + "][" + std::to_string(j) + "]";
      at.col(j) = vectorize(read_payload(ak[static_cast<std::size_t>(j)], s, where, warnings), s);
    }
    p.at.push_back(std::move(at));
  }
  const auto findings = validate(p);
  if (!findings.empty()) fail(findings.front().message);
  return p;
}

std::string serialize_native(const ProblemData& p) {
  json doc;
  doc["blocks"] = json::array();
  for (const auto& s : p.specs) {
    doc["blocks"].push_back(
        {{"kind", std::string(to_string(s.kind))}, {"dim", s.dim}, {"barrier", s.barrier}});
  }
  doc["b"] = json::array();
  for (Index k = 0; k < p.m; ++k) doc["b"].push_back(p.b(k));
  doc["C"] = json::array();
  doc["A"] = json::array();
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    doc["C"].push_back(write_payload(p.c[k], s));
    json ak = json::array();
    for (Index j = 0; j < p.m; ++j) {
      ak.push_back(write_payload(unvectorize(p.at[k].col(j), s), s));
    }
    doc["A"].push_back(std::move(ak));
  }
  return doc.dump(1) + "\n";
}

namespace {

struct SdpaLine {
  int number;
  std::string text;
};

std::vector<std::string> tokens_of(std::string line) {
  for (char& ch : line) {
    if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
  }
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

bool parse_double(const std::string& t, double& out) {
  const char* begin = t.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

bool parse_int(const std::string& t, long long& out) {
  const char* begin = t.c_str();
  char* end = nullptr;
  out = std::strtoll(begin, &end, 10);
  if (end != begin && *end == '\0') return true;
  double d = 0.0;
  if (parse_double(t, d) && d == std::floor(d) && std::abs(d) < 1e15) {
    out = static_cast<long long>(d);
    return true;
  }
  return false;
}

}  // namespace

ProblemData parse_sdpa(std::string_view text, std::vector<std::string>* warnings) {
  std::vector<SdpaLine> lines;
  {
    std::string buf(text);
    std::istringstream is(buf);
    int n = 0;
    for (std::string line; std::getline(is, line);) {
      ++n;
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (line[first] == '"' || line[first] == '*') continue;
      lines.push_back({n, line});
    }
  }
  std::size_t cur = 0;
  auto need_line = [&](const char* what) -> const SdpaLine& {
    if (cur >= lines.size()) throw ParseError(std::string("unexpected end of file: ") + what, 0);
    return lines[cur++];
  };

  long long m = 0;
  {
    const auto& ln = need_line("constraint count");
    const auto t = tokens_of(ln.text);
    if (t.empty() || !parse_int(t[0], m) || m < 0) {
      throw ParseError("expected the number of constraints", ln.number);
    }
  }
  long long nblocks = 0;
  {
    const auto& ln = need_line("block count");
    const auto t = tokens_of(ln.text);
    if (t.empty() || !parse_int(t[0], nblocks) || nblocks < 1) {
      throw ParseError("expected a positive number of blocks", ln.number);
    }
  }
  std::vector<long long> sizes;
  while (static_cast<long long>(sizes.size()) < nblocks) {
    const auto& ln = need_line("block sizes");
    for (const auto& t : tokens_of(ln.text)) {
      if (static_cast<long long>(sizes.size()) == nblocks) break;
      long long v = 0;
      if (!parse_int(t, v) || v == 0) throw ParseError("bad block size \"" + t + "\"", ln.number);
      sizes.push_back(v);
    }
  }
  std::vector<double> cvec;
  while (static_cast<long long>(cvec.size()) < m) {
    const auto& ln = need_line("objective vector");
    for (const auto& t : tokens_of(ln.text)) {
      if (static_cast<long long>(cvec.size()) == m) break;
      double v = 0.0;
      if (!parse_double(t, v)) throw ParseError("bad number \"" + t + "\"", ln.number);
      cvec.push_back(v);
    }
  }

  ProblemData p;
  p.m = static_cast<Index>(m);
  p.b = -Eigen::Map<const Vector>(cvec.data(), p.m);
  std::vector<std::vector<Matrix>> f(static_cast<std::size_t>(nblocks));
  for (long long s : sizes) {
    BlockSpec spec{s < 0 ? ConeKind::Lin : ConeKind::Sdp, static_cast<Index>(std::llabs(s)), 0.0};
    p.specs.push_back(spec);
  }
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    const auto& s = p.specs[k];
    const Index cols = s.kind == ConeKind::Sdp ? s.dim : 1;
    f[k].assign(static_cast<std::size_t>(m + 1), Matrix::Zero(s.dim, cols));
  }

  std::map<std::tuple<long long, long long, long long, long long>, int> seen;
  while (cur < lines.size()) {
    const auto& ln = lines[cur++];
    const auto t = tokens_of(ln.text);
    if (t.size() < 5) throw ParseError("expected \"k block i j value\"", ln.number);
    long long k = 0, blk = 0, i = 0, j = 0;
    double v = 0.0;
    if (!parse_int(t[0], k) || !parse_int(t[1], blk) || !parse_int(t[2], i) ||
        !parse_int(t[3], j) || !parse_double(t[4], v)) {
      throw ParseError("malformed entry line", ln.number);
    }
    if (k < 0 || k > m) throw ParseError("matrix index out of range", ln.number);
    if (blk < 1 || blk > nblocks) throw ParseError("block index out of range", ln.number);
    const auto& s = p.specs[static_cast<std::size_t>(blk - 1)];
    if (i < 1 || j < 1 || i > s.dim || j > s.dim) {
      throw ParseError("entry index out of range", ln.number);
    }
    if (i > j) throw ParseError("entry below the diagonal (i > j)", ln.number);
    if (s.kind == ConeKind::Lin && i != j) {
      throw ParseError("off-diagonal entry in a diagonal block", ln.number);
    }
    auto [it, fresh] = seen.try_emplace({k, blk, i, j}, ln.number);
    if (!fresh && warnings) {
      warnings->push_back("line " + std::to_string(ln.number) + ": duplicate of line " +
                          std::to_string(it->second) + ", last value kept");
    }
    it->second = ln.number;
    Matrix& target = f[static_cast<std::size_t>(blk - 1)][static_cast<std::size_t>(k)];
    if (s.kind == ConeKind::Lin) {
      target(i - 1, 0) = v;
    } else {
      target(i - 1, j - 1) = v;
      target(j - 1, i - 1) = v;
    }
  }

  for (std::size_t b = 0; b < p.specs.size(); ++b) {
    const auto& s = p.specs[b];
    p.c.blocks.push_back(-f[b][0]);
    Matrix at(vec_length(s), p.m);
    for (Index k = 0; k < p.m; ++k) {
      at.col(k) = -vectorize(f[b][static_cast<std::size_t>(k + 1)], s);
    }
    p.at.push_back(std::move(at));
  }
  return p;
}

Format format_for_path(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  auto ends_with = [&](std::string_view suf) {
    return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends_with(".dat-s") || ends_with(".dat")) return Format::Sdpa;
  return Format::Native;
}

ProblemData load_problem(const std::filesystem::path& path, Format format,
                         std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (format == Format::Auto) format = format_for_path(path);
  return format == Format::Sdpa ? parse_sdpa(ss.str(), warnings)
                                : parse_native(ss.str(), warnings);
}

namespace {

json real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_of(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ParseError("expected a real number in result document", 0);
}

json matrix_json(const Matrix& a) {
  json out = json::array();
  if (a.cols() == 1) {
    for (Index i = 0; i < a.rows(); ++i) out.push_back(real(a(i, 0)));
    return out;
  }
  for (Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(real(a(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_of(const json& v) {
  if (!v.is_array()) throw ParseError("expected an array in result document", 0);
  const Index rows = static_cast<Index>(v.size());
  if (rows > 0 && v[0].is_array()) {
    Matrix a(rows, rows);
    for (Index i = 0; i < rows; ++i) {
      const json& row = v[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Index>(row.size()) != rows) {
        throw ParseError("ragged matrix in result document", 0);
      }
      for (Index j = 0; j < rows; ++j) a(i, j) = real_of(row[static_cast<std::size_t>(j)]);
    }
    return a;
  }
  Matrix a(rows, 1);
  for (Index i = 0; i < rows; ++i) a(i, 0) = real_of(v[static_cast<std::size_t>(i)]);
  return a;
}

json blockvec_json(const BlockVec& v) {
  json out = json::array();
  for (const auto& b : v.blocks) out.push_back(matrix_json(b));
  return out;
}

BlockVec blockvec_of(const json& v) {
  BlockVec out;
  for (const auto& b : v) out.blocks.push_back(matrix_of(b));
  return out;
}

}  // namespace

std::string result_to_json(const SolveResult& r, const std::vector<BlockSpec>& specs) {
  json doc;
  doc["status"] = std::string(to_string(r.status));
  doc["message"] = r.message;
  doc["pobj"] = real(r.pobj);
  doc["dobj"] = real(r.dobj);
  doc["gap"] = real(r.gap);
  doc["relgap"] = real(r.relgap);
  doc["pinfeas"] = real(r.pinfeas);
  doc["dinfeas"] = real(r.dinfeas);
  doc["iterations"] = r.iterations;
  doc["factorizations"] = r.factorizations;
  doc["blocks"] = json::array();
  for (const auto& s : specs) {
    doc["blocks"].push_back(
        {{"kind", std::string(to_string(s.kind))}, {"dim", s.dim}, {"barrier", s.barrier}});
  }
  doc["x"] = blockvec_json(r.x);
  doc["y"] = json::array();
  for (Index i = 0; i < r.y.size(); ++i) doc["y"].push_back(real(r.y(i)));
  doc["z"] = blockvec_json(r.z);
  doc["trace"] = json::array();
  for (const auto& t : r.trace) {
    doc["trace"].push_back({{"iter", t.iter},
                            {"mu", real(t.mu)},
                            {"sigma", real(t.sigma)},
                            {"alpha_p", real(t.alpha_p)},
                            {"alpha_d", real(t.alpha_d)},
                            {"pobj", real(t.pobj)},
                            {"dobj", real(t.dobj)},
                            {"gap", real(t.gap)},
                            {"relgap", real(t.relgap)},
                            {"pinfeas", real(t.pinfeas)},
                            {"dinfeas", real(t.dinfeas)},
                            {"path", t.path},
                            {"perturbed", t.perturbed},
                            {"krylov_iters", t.krylov_iters}});
  }
  return doc.dump(1) + "\n";
}

SolveResult result_from_json(std::string_view text, std::vector<BlockSpec>* specs) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("syntax error: ") + e.what(),
                     line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  SolveResult r;
  try {
    const auto status = parse_status(doc.at("status").get<std::string>());
    if (!status) throw ParseError("unknown status", 0);
    r.status = *status;
    r.message = doc.at("message").get<std::string>();
    r.pobj = real_of(doc.at("pobj"));
    r.dobj = real_of(doc.at("dobj"));
    r.gap = real_of(doc.at("gap"));
    r.relgap = real_of(doc.at("relgap"));
    r.pinfeas = real_of(doc.at("pinfeas"));
    r.dinfeas = real_of(doc.at("dinfeas"));
    r.iterations = doc.at("iterations").get<int>();
    r.factorizations = doc.at("factorizations").get<int>();
    if (specs) {
      specs->clear();
      for (const auto& b : doc.at("blocks")) {
        specs->push_back({parse_cone_kind(b.at("kind").get<std::string>()).value(),
                          b.at("dim").get<Index>(), b.at("barrier").get<double>()});
      }
    }
    r.x = blockvec_of(doc.at("x"));
    r.z = blockvec_of(doc.at("z"));
    const json& y = doc.at("y");
    r.y.resize(static_cast<Index>(y.size()));
    for (Index i = 0; i < r.y.size(); ++i) r.y(i) = real_of(y[static_cast<std::size_t>(i)]);
    for (const auto& t : doc.at("trace")) {
      IterationRecord rec;
      rec.iter = t.at("iter").get<int>();
      rec.mu = real_of(t.at("mu"));
      rec.sigma = real_of(t.at("sigma"));
      rec.alpha_p = real_of(t.at("alpha_p"));
      rec.alpha_d = real_of(t.at("alpha_d"));
      rec.pobj = real_of(t.at("pobj"));
      rec.dobj = real_of(t.at("dobj"));
      rec.gap = real_of(t.at("gap"));
      rec.relgap = real_of(t.at("relgap"));
      rec.pinfeas = real_of(t.at("pinfeas"));
      rec.dinfeas = real_of(t.at("dinfeas"));
      rec.path = t.at("path").get<std::string>();
      rec.perturbed = t.at("perturbed").get<bool>();
      rec.krylov_iters = t.at("krylov_iters").get<int>();
      r.trace.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed result document: ") + e.what(), 0);
  } catch (const std::bad_optional_access&) {
    throw ParseError("malformed result document: unknown cone kind", 0);
  }
  return r;
}

}  // namespace sqlp::io
