#include "dataset.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace pnest {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& tok, double* out) {
  if (tok.empty()) return false;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto res = std::from_chars(begin, end, *out);
  return res.ec == std::errc() && res.ptr == end;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* outcome_kind_name(OutcomeKind k) {
  return k == OutcomeKind::binary ? "binary" : "continuous";
}

OutcomeKind outcome_kind_from_name(const std::string& name) {
  if (name == "binary") return OutcomeKind::binary;
  if (name == "continuous") return OutcomeKind::continuous;
  throw Error(ErrorCode::InvariantViolation, "unknown outcome kind '" + name + "'");
}

PartialNestDataset PartialNestDataset::from_rows(std::vector<Observation> rows,
                                                 std::vector<std::string> covariate_names,
                                                 OutcomeKind kind) {
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(covariate_names.size());
  if (n == 0) throw Error(ErrorCode::InvariantViolation, "dataset has no rows");

  int n0 = 0, n1 = 0, n_p0s1 = 0, n_p0s0 = 0, n_a0 = 0, n_a1 = 0;
  for (int i = 0; i < n; ++i) {
    const Observation& o = rows[i];
    const std::string at = "row " + std::to_string(i + 1);
    if (static_cast<int>(o.x.size()) != d)
      throw Error(ErrorCode::InvariantViolation,
                  at + " has " + std::to_string(o.x.size()) + " covariates, expected " +
                      std::to_string(d));
    for (double v : o.x)
      if (!std::isfinite(v))
        throw Error(ErrorCode::NonNumericCovariate, at + " has a non-finite covariate value");
    if (o.p != 0 && o.p != 1)
      throw Error(ErrorCode::InvariantViolation, at + ": p must be 0 or 1");
    if (o.s != 0 && o.s != 1)
      throw Error(ErrorCode::InvariantViolation, at + ": s must be 0 or 1");
    if (o.p == 1 && o.s != 1)
      throw Error(ErrorCode::InvariantViolation,
                  at + ": p=1 requires s=1 (no non-randomized rows are sampled in the "
                       "non-nested part)");
    if (o.s == 0 && (o.a.has_value() || o.y.has_value()))
      throw Error(ErrorCode::InvariantViolation,
                  at + ": s=0 rows must not carry treatment or outcome values");
    if (o.s == 1 && (!o.a.has_value() || !o.y.has_value()))
      throw Error(ErrorCode::InvariantViolation,
                  at + ": s=1 rows must carry both treatment and outcome values");
    if (o.a.has_value() && *o.a != 0 && *o.a != 1)
      throw Error(ErrorCode::InvariantViolation, at + ": a must be 0, 1, or empty");
    if (o.y.has_value() && !std::isfinite(*o.y))
      throw Error(ErrorCode::InvariantViolation, at + ": y must be finite or empty");
    if (kind == OutcomeKind::binary && o.y.has_value() && *o.y != 0.0 && *o.y != 1.0)
      throw Error(ErrorCode::InvariantViolation,
                  at + ": binary outcome requires y in {0,1}");
    if (o.p == 0) {
      ++n0;
      if (o.s == 1) ++n_p0s1; else ++n_p0s0;
    } else {
      ++n1;
    }
    if (o.a.has_value()) (*o.a == 1 ? n_a1 : n_a0)++;
  }
  if (n_p0s1 == 0)
    throw Error(ErrorCode::InvariantViolation, "no trial rows (s=1) in the nested part (p=0)");
  if (n_p0s0 == 0)
    throw Error(ErrorCode::InvariantViolation,
                "no non-randomized rows (s=0) in the nested part (p=0)");
  if (n_a0 == 0 || n_a1 == 0)
    throw Error(ErrorCode::InvariantViolation,
                "trial rows must include both treatment arms");

  PartialNestDataset data;
  data.obs_ = std::move(rows);
  data.names_ = std::move(covariate_names);
  data.kind_ = kind;
  data.n0_ = n0;
  data.n1_ = n1;
  data.X_.resize(n, d);
  data.p_.resize(n);
  data.s_.resize(n);
  data.a_.resize(n);
  data.y_.resize(n);
  for (int i = 0; i < n; ++i) {
    const Observation& o = data.obs_[i];
    for (int j = 0; j < d; ++j) data.X_(i, j) = o.x[j];
    data.p_(i) = o.p;
    data.s_(i) = o.s;
    data.a_(i) = o.a.value_or(-1);
    data.y_(i) = o.y.value_or(std::numeric_limits<double>::quiet_NaN());
  }
  return data;
}

PartialNestDataset parse_csv_stream(std::istream& in, const std::string& origin,
                                    const std::vector<std::string>& covariate_columns,
                                    OutcomeKind kind) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::MissingColumn, origin + ": empty file, header row required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  std::unordered_map<std::string, int> col;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) col[header[j]] = j;

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end())
      throw Error(ErrorCode::MissingColumn, origin + ": required column '" + name + "' not found");
    return it->second;
  };
  std::vector<int> xcols;
  xcols.reserve(covariate_columns.size());
  for (const auto& name : covariate_columns) xcols.push_back(require(name));
  const int pc = require("p"), sc = require("s"), ac = require("a"), yc = require("y");

  std::vector<Observation> rows;
  int rownum = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++rownum;
    const std::string at = origin + ": row " + std::to_string(rownum);
    const std::vector<std::string> f = split_line(line);
    if (f.size() != header.size())
      throw Error(ErrorCode::InvariantViolation,
                  at + " has " + std::to_string(f.size()) + " fields, header has " +
                      std::to_string(header.size()));
    Observation o;
    o.x.reserve(xcols.size());
    for (size_t j = 0; j < xcols.size(); ++j) {
      double v;
      if (!parse_double(f[xcols[j]], &v))
        throw Error(ErrorCode::NonNumericCovariate,
                    at + ": covariate '" + covariate_columns[j] + "' value '" + f[xcols[j]] +
                        "' is not numeric");
      o.x.push_back(v);
    }
    double v;
    if (!parse_double(f[pc], &v) || (v != 0.0 && v != 1.0))
      throw Error(ErrorCode::InvariantViolation, at + ": p must be 0 or 1, got '" + f[pc] + "'");
    o.p = static_cast<int>(v);
    if (!parse_double(f[sc], &v) || (v != 0.0 && v != 1.0))
      throw Error(ErrorCode::InvariantViolation, at + ": s must be 0 or 1, got '" + f[sc] + "'");
    o.s = static_cast<int>(v);
    if (!f[ac].empty()) {
      if (!parse_double(f[ac], &v) || (v != 0.0 && v != 1.0))
        throw Error(ErrorCode::InvariantViolation,
                    at + ": a must be 0, 1, or empty, got '" + f[ac] + "'");
      o.a = static_cast<int>(v);
    }
    if (!f[yc].empty()) {
      if (!parse_double(f[yc], &v))
        throw Error(ErrorCode::InvariantViolation,
                    at + ": y must be numeric or empty, got '" + f[yc] + "'");
      o.y = v;
    }
    rows.push_back(std::move(o));
  }
  try {
    return PartialNestDataset::from_rows(std::move(rows), covariate_columns, kind);
  } catch (const Error& e) {
    throw Error(e.code(), origin + ": " + e.detail());
  }
}

PartialNestDataset parse_csv(const std::string& path,
                             const std::vector<std::string>& covariate_columns,
                             OutcomeKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_csv_stream(in, path, covariate_columns, kind);
}

std::vector<std::string> csv_covariate_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::MissingColumn, path + ": empty file, header row required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  for (const auto& name : split_line(line))
    if (name != "p" && name != "s" && name != "a" && name != "y") out.push_back(name);
  return out;
}

void serialize_csv(const PartialNestDataset& data, std::ostream& out) {
  for (const auto& name : data.covariate_names()) out << name << ",";
  out << "p,s,a,y\n";
  for (const Observation& o : data.rows()) {
    for (double v : o.x) out << fmt_double(v) << ",";
    out << o.p << "," << o.s << ",";
    if (o.a.has_value()) out << *o.a;
    out << ",";
    if (o.y.has_value()) out << fmt_double(*o.y);
    out << "\n";
  }
}

DesignMatrix design_matrix(const PartialNestDataset& data,
                           const std::function<bool(const Observation&)>& subset,
                           const std::vector<int>* cols) {
  std::vector<int> keep;
  for (int i = 0; i < data.n(); ++i)
    if (subset(data.rows()[i])) keep.push_back(i);
  if (keep.empty()) throw Error(ErrorCode::EmptySubset, "row predicate selects no rows");

  std::vector<int> use;
  if (cols) {
    use = *cols;
    for (int j : use)
      if (j < 0 || j >= data.dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "covariate index " + std::to_string(j) + " out of range");
  } else {
    use.resize(data.dim());
    for (int j = 0; j < data.dim(); ++j) use[j] = j;
  }

  DesignMatrix dm;
  dm.F.resize(static_cast<int>(keep.size()), 1 + static_cast<int>(use.size()));
  dm.row_indices = keep;
  for (size_t r = 0; r < keep.size(); ++r) {
    dm.F(static_cast<int>(r), 0) = 1.0;
    for (size_t j = 0; j < use.size(); ++j)
      dm.F(static_cast<int>(r), 1 + static_cast<int>(j)) = data.covariates()(keep[r], use[j]);
  }
  return dm;
}

}  // namespace pnest
