#pragma once

// CSV input (RFC 4180) and the JSON/CSV artifacts written by the command-line tool.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "sppca/error.hpp"
#include "sppca/pca.hpp"
#include "sppca/simgen.hpp"
#include "sppca/tuning.hpp"
#include "sppca/types.hpp"
#include "sppca/weights.hpp"

namespace sppca {

using json = nlohmann::json;

namespace detail {

// Splits RFC 4180 text into records. Quoted fields may contain separators,
// doubled quotes and line breaks.
inline std::vector<std::vector<std::string>> parse_csv_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) records.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started) throw ParseError("stray quote in unquoted field on line " + std::to_string(line));
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_row();
        ++line;
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field += ch;
        field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return records;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses CSV text with one header row. With `standardize`, columns are
/// centered and divided by their sample standard deviation (n - 1).
inline DataSet parse_csv(const std::string& text, bool standardize) {
  auto records = detail::parse_csv_records(text);
  if (records.empty()) throw EmptyData("CSV input is empty");
  std::vector<std::string> header = std::move(records.front());
  if (records.size() == 1) throw EmptyData("CSV input has a header but no data rows");
  const std::size_t p = header.size();
  const Index n = static_cast<Index>(records.size() - 1);
  MatrixXd X(n, static_cast<Index>(p));
  for (Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    const std::size_t row_no = static_cast<std::size_t>(i) + 2;  // 1-based, header is row 1
    if (rec.size() != p) {
      throw ParseError("row " + std::to_string(row_no) + " has " + std::to_string(rec.size()) +
                       " fields, header has " + std::to_string(p));
    }
    for (std::size_t j = 0; j < p; ++j) {
      double v = 0.0;
      if (!detail::parse_double(rec[j], v)) {
        throw ParseError("non-numeric cell '" + rec[j] + "' at row " + std::to_string(row_no) + ", column " +
                         std::to_string(j + 1) + " (" + header[j] + ")");
      }
      X(i, static_cast<Index>(j)) = v;
    }
  }
  if (standardize) {
    if (n < 2) throw EmptyData("standardization needs at least 2 rows");
    for (Index j = 0; j < X.cols(); ++j) {
      const double mean = X.col(j).mean();
      X.col(j).array() -= mean;
      const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(n - 1));
      if (!(sd > 0.0)) {
        throw DegenerateScale("column '" + header[static_cast<std::size_t>(j)] + "' is constant");
      }
      X.col(j) /= sd;
    }
  }
  return DataSet(std::move(X), std::move(header));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DataSet load_csv(const std::string& path, bool standardize) {
  return parse_csv(read_file(path), standardize);
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline json to_json_array(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v[i]) ? json(v[i]) : json(nullptr));
  return a;
}

inline json to_json_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

inline json ar_curve_json(const ARCurve& c) {
  return {{"a", to_json_array(c.grid)},
          {"ar_raw", to_json_array(c.ar_raw)},
          {"ar_smooth", to_json_array(c.ar_smooth)},
          {"slope", to_json_array(c.slope)}};
}

inline json tuning_json(const TuningResult& r, const SplineFit& spline) {
  json j = {{"a_star", r.a_star},
            {"ar_at_a_star", r.ar_at_a_star},
            {"fallback_used", r.fallback_used},
            {"candidates", to_json_array(r.candidates)},
            {"spline_lambda", spline.lambda},
            {"spline_df", spline.df},
            {"gcv_fallback", spline.gcv_fallback}};
  if (!spline.warning.empty()) j["warning"] = spline.warning;
  return j;
}

inline json model_json(const FitResult& fit, const PCAModel& model, const WeightSpec& spec) {
  json vecs = json::array();
  for (Index j = 0; j < model.eigenvectors.cols(); ++j) vecs.push_back(to_json_array(VectorXd(model.eigenvectors.col(j))));
  return {{"mu", to_json_array(fit.ls.mu)},
          {"eigenvalues", to_json_array(model.eigenvalues)},
          {"eigenvectors", vecs},
          {"a", fit.a},
          {"alpha", spec.alpha},
          {"k", model.k},
          {"diag_approx", fit.ls.diag_approx},
          {"active_ratio", fit.active_ratio},
          {"iterations", fit.iterations},
          {"converged", fit.converged}};
}

inline json experiment_json(const ExperimentTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"n", r.config.n},
                    {"p", r.config.p},
                    {"k", r.config.k},
                    {"nu", r.config.nu},
                    {"pi", r.config.pi},
                    {"c", r.config.c},
                    {"seed", r.config.seed},
                    {"method", method_name(r.method)},
                    {"mean_rho", std::isfinite(r.mean_rho) ? json(r.mean_rho) : json(nullptr)},
                    {"se_rho", std::isfinite(r.se_rho) ? json(r.se_rho) : json(nullptr)},
                    {"n_ok", r.n_ok},
                    {"n_fail", r.n_fail},
                    {"valid", r.valid},
                    {"replicate_rho", to_json_array(r.replicate_rho)}});
  }
  return {{"rows", rows}};
}

inline std::string experiment_csv(const ExperimentTable& t) {
  std::string out = "n,p,k,nu,pi,c,seed,method,mean_rho,se_rho,n_ok,n_fail,valid\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.config.n) + ',' + std::to_string(r.config.p) + ',' + std::to_string(r.config.k) + ',' +
           format_number(r.config.nu) + ',' + format_number(r.config.pi) + ',' + format_number(r.config.c) + ',' +
           std::to_string(r.config.seed) + ',' + method_name(r.method) + ',' + format_number(r.mean_rho) + ',' +
           format_number(r.se_rho) + ',' + std::to_string(r.n_ok) + ',' + std::to_string(r.n_fail) + ',' +
           (r.valid ? "true" : "false") + '\n';
  }
  return out;
}

/// Principal-component scores Gamma_k'(x_i - mu), one row per observation.
inline std::string scores_csv(const DataSet& data, const FitResult& fit, const PCAModel& model) {
  std::string out;
  for (Index j = 0; j < model.k; ++j) out += (j ? ",pc" : "pc") + std::to_string(j + 1);
  out += '\n';
  const MatrixXd S = (data.X.rowwise() - fit.ls.mu.transpose()) * model.eigenvectors;
  for (Index i = 0; i < S.rows(); ++i) {
    for (Index j = 0; j < S.cols(); ++j) out += (j ? "," : "") + format_number(S(i, j));
    out += '\n';
  }
  return out;
}

/// Per-observation weights w(d(x_i)) at the fit and the active flag.
inline std::string weights_csv(const DataSet& data, const FitResult& fit, const WeightSpec& spec) {
  std::string out = "row,distance,weight,active\n";
  const VectorXd d = ScatterMetric(fit.ls).rows(data.X);
  for (Index i = 0; i < data.n(); ++i) {
    const bool active = fit.active_mask.empty() ? d[i] < spec.cutoff() : fit.active_mask[static_cast<std::size_t>(i)];
    const double w = active ? weight(d[i], spec) : 0.0;
    out += std::to_string(i + 1) + ',' + format_number(d[i]) + ',' + format_number(w) + ',' + (active ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string matrix_csv(const MatrixXd& X, const std::vector<std::string>& names) {
  std::string out;
  for (Index j = 0; j < X.cols(); ++j) {
    out += j ? "," : "";
    out += static_cast<std::size_t>(j) < names.size() ? csv_escape(names[static_cast<std::size_t>(j)])
                                                     : "x" + std::to_string(j + 1);
  }
  out += '\n';
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) out += (j ? "," : "") + format_number(X(i, j));
    out += '\n';
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ParseError("failed writing '" + path + "'");
}

}  // namespace sppca
