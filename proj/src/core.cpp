#include "starmid/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "starmid/errors.hpp"
#include "starmid/parallel.hpp"

namespace starmid {

SampleSet SampleSet::first_half() const {
  const auto n1 = static_cast<Eigen::Index>(size() / 2);
  return SampleSet{xs.topRows(n1), ys.head(n1)};
}

SampleSet SampleSet::second_half() const {
  const auto n1 = static_cast<Eigen::Index>(size() / 2);
  return SampleSet{xs.bottomRows(xs.rows() - n1), ys.tail(ys.size() - n1)};
}

Hypothesis Hypothesis::from_dictionary(const Dictionary& dict, std::size_t id) {
  if (id >= dict.size())
    throw ConfigError("hypothesis id: out of range");
  return Hypothesis{dict.coeffs.row(id).transpose(), dict.offsets(id)};
}

Hypothesis Hypothesis::midpoint(const Dictionary& dict, std::size_t j, std::size_t k) {
  return segment_point(dict, j, k, 0.5);
}

Hypothesis Hypothesis::segment_point(const Dictionary& dict, std::size_t j, std::size_t k,
                                     double lambda) {
  if (j >= dict.size() || k >= dict.size())
    throw ConfigError("hypothesis id: out of range");
  Hypothesis h;
  h.coeffs = lambda * dict.coeffs.row(j).transpose() + (1.0 - lambda) * dict.coeffs.row(k).transpose();
  h.offset = lambda * dict.offsets(j) + (1.0 - lambda) * dict.offsets(k);
  return h;
}

EvaluationMatrix::EvaluationMatrix(Eigen::MatrixXd v) : values(std::move(v)) {
  if (!values.allFinite())
    throw NumericError("evaluation matrix contains non-finite entries");
}

EvaluationMatrix evaluate(const Dictionary& dict, const SampleSet& sample) {
  if (dict.dim() != sample.dim())
    throw ConfigError("dictionary dimension: does not match sample");
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto m = static_cast<Eigen::Index>(dict.size());
  Eigen::MatrixXd vals(n, m);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      vals(i, j) = dict.coeffs.row(j).dot(sample.xs.row(i)) + dict.offsets(j);
  }
  return EvaluationMatrix(std::move(vals));
}

double empirical_risk(const Eigen::VectorXd& column, const Eigen::VectorXd& ys) {
  if (column.size() != ys.size())
    throw ConfigError("column: length does not match responses");
  if (column.size() == 0)
    throw ConfigError("column: empty");
  double s = 0.0;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const double r = column(i) - ys(i);
    s += r * r;
  }
  return s / static_cast<double>(column.size());
}

ErmResult erm(const EvaluationMatrix& eval, const Eigen::VectorXd& ys,
              const std::vector<std::size_t>& candidates) {
  if (candidates.empty())
    throw ConfigError("candidates: empty hypothesis list");
  bool have = false;
  ErmResult best;
  for (std::size_t id : candidates) {
    if (id >= eval.cols())
      throw ConfigError("candidates: id out of range");
    const double r = empirical_risk(eval.values.col(id), ys);
    if (!have || r < best.risk || (r == best.risk && id < best.id)) {
      best = ErmResult{id, r};
      have = true;
    }
  }
  return best;
}

ErmResult erm_all(const EvaluationMatrix& eval, const Eigen::VectorXd& ys) {
  std::vector<std::size_t> all(eval.cols());
  for (std::size_t j = 0; j < all.size(); ++j)
    all[j] = j;
  return erm(eval, ys, all);
}

// ---- RiskOracle -------------------------------------------------------------

RiskOracle RiskOracle::analytic(Eigen::MatrixXd sigma, Eigen::VectorXd target_coeffs,
                                double target_offset, double noise_m2) {
  if (sigma.rows() != sigma.cols())
    throw ConfigError("sigma: must be square");
  if (sigma.rows() != target_coeffs.size())
    throw ConfigError("target_coeffs: dimension does not match sigma");
  if (!(noise_m2 >= 0.0))
    throw ConfigError("noise_m2: must be nonnegative");
  RiskOracle o;
  o.analytic_ = true;
  o.sigma_ = std::move(sigma);
  o.target_coeffs_ = std::move(target_coeffs);
  o.target_offset_ = target_offset;
  o.noise_m2_ = noise_m2;
  return o;
}

RiskOracle RiskOracle::monte_carlo(SampleSet big, std::uint64_t seed) {
  if (big.size() == 0)
    throw ConfigError("oracle sample: empty");
  RiskOracle o;
  o.analytic_ = false;
  o.big_ = std::move(big);
  o.seed_ = seed;
  return o;
}

RiskEstimate RiskOracle::true_risk(const Hypothesis& h) const {
  if (analytic_) {
    const Eigen::VectorXd d = h.coeffs - target_coeffs_;
    const double db = h.offset - target_offset_;
    return RiskEstimate{d.dot(sigma_ * d) + db * db + noise_m2_, 0.0};
  }
  const auto n = static_cast<Eigen::Index>(big_.size());
  double s = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = h.coeffs.dot(big_.xs.row(i)) + h.offset - big_.ys(i);
    const double q = r * r;
    s += q;
    s2 += q * q;
  }
  const double mean = s / static_cast<double>(n);
  const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
  return RiskEstimate{mean, std::sqrt(var / static_cast<double>(n))};
}

double RiskOracle::inner(const Hypothesis& f, const Hypothesis& g) const {
  if (analytic_)
    return f.coeffs.dot(sigma_ * g.coeffs) + f.offset * g.offset;
  const auto n = static_cast<Eigen::Index>(big_.size());
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double fv = f.coeffs.dot(big_.xs.row(i)) + f.offset;
    const double gv = g.coeffs.dot(big_.xs.row(i)) + g.offset;
    s += fv * gv;
  }
  return s / static_cast<double>(n);
}

double RiskOracle::distance2(const Hypothesis& f, const Hypothesis& g) const {
  Hypothesis d{f.coeffs - g.coeffs, f.offset - g.offset};
  return inner(d, d);
}

double RiskOracle::distance(const Hypothesis& f, const Hypothesis& g) const {
  return std::sqrt(std::max(0.0, distance2(f, g)));
}

double RiskOracle::multiplier_mean(const Hypothesis& u0, const Hypothesis& g) const {
  if (analytic_) {
    // E (u0(X) - Y) g(X) = <u0 - target, g>; independent centered noise drops out.
    Hypothesis d{u0.coeffs - target_coeffs_, u0.offset - target_offset_};
    return inner(d, g);
  }
  const auto n = static_cast<Eigen::Index>(big_.size());
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = u0.coeffs.dot(big_.xs.row(i)) + u0.offset - big_.ys(i);
    const double gv = g.coeffs.dot(big_.xs.row(i)) + g.offset;
    s += xi * gv;
  }
  return s / static_cast<double>(n);
}

Eigen::MatrixXd RiskOracle::second_moment_augmented(std::size_t dim) const {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d + 1);
  if (analytic_) {
    if (sigma_.rows() != d)
      throw ConfigError("dimension: does not match the oracle design");
    m.topLeftCorner(d, d) = sigma_;
    m(d, d) = 1.0;
    return m;
  }
  if (static_cast<Eigen::Index>(big_.dim()) != d)
    throw ConfigError("dimension: does not match the oracle sample");
  const auto n = static_cast<Eigen::Index>(big_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row(d + 1);
    row.head(d) = big_.xs.row(i).transpose();
    row(d) = 1.0;
    m.selfadjointView<Eigen::Lower>().rankUpdate(row);
  }
  m = m.selfadjointView<Eigen::Lower>();
  return m / static_cast<double>(n);
}

std::size_t RiskOracle::best_in_dictionary(const Dictionary& dict) const {
  if (dict.size() == 0)
    throw ConfigError("dictionary: empty");
  std::size_t best = 0;
  double best_risk = true_risk(Hypothesis::from_dictionary(dict, 0)).value;
  for (std::size_t j = 1; j < dict.size(); ++j) {
    const double r = true_risk(Hypothesis::from_dictionary(dict, j)).value;
    if (r < best_risk) {
      best = j;
      best_risk = r;
    }
  }
  return best;
}

Midpoint RiskOracle::best_midpoint(const Dictionary& dict) const {
  if (dict.size() == 0)
    throw ConfigError("dictionary: empty");
  Midpoint best;
  double best_risk = true_risk(Hypothesis::midpoint(dict, 0, 0)).value;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    for (std::size_t k = j; k < dict.size(); ++k) {
      const double r = true_risk(Hypothesis::midpoint(dict, j, k)).value;
      if (r < best_risk) {
        best = Midpoint(j, k);
        best_risk = r;
      }
    }
  }
  return best;
}

// ---- CSV --------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok, int line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw ParseError("expected a number, got '" + tok + "'", line_no);
  return v;
}

std::vector<std::vector<double>> read_numeric_rows(std::istream& in, std::size_t ncols,
                                                   int first_line) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = first_line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      ++line_no;
      continue;
    }
    const auto toks = split_line(line);
    if (toks.size() != ncols)
      throw ParseError("expected " + std::to_string(ncols) + " fields, got " +
                           std::to_string(toks.size()),
                       line_no);
    std::vector<double> row(ncols);
    for (std::size_t j = 0; j < ncols; ++j)
      row[j] = parse_double(toks[j], line_no);
    rows.push_back(std::move(row));
    ++line_no;
  }
  return rows;
}

} // namespace

SampleSet read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    throw ParseError("empty file", 1);
  const auto names = split_line(header);
  if (names.size() < 2)
    throw ParseError("sample file needs at least one covariate column and a response", 1);
  const std::size_t d = names.size() - 1;
  const auto rows = read_numeric_rows(in, names.size(), 2);
  if (rows.empty())
    throw ParseError("no data rows", 2);
  SampleSet s;
  s.xs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  s.ys.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j)
      s.xs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    s.ys(static_cast<Eigen::Index>(i)) = rows[i][d];
  }
  return s;
}

void write_samples_csv(const std::string& path, const SampleSet& sample) {
  std::ofstream out(path);
  if (!out)
    throw ParseError("cannot open '" + path + "' for writing");
  for (std::size_t j = 1; j <= sample.dim(); ++j)
    out << "x" << j << ",";
  out << "y\n";
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (std::size_t j = 0; j < sample.dim(); ++j)
      out << format_double(sample.xs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << ",";
    out << format_double(sample.ys(static_cast<Eigen::Index>(i))) << "\n";
  }
}

Dictionary read_dictionary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    throw ParseError("empty file", 1);
  const auto names = split_line(header);
  if (names.empty() || names[0].empty())
    throw ParseError("dictionary file needs at least one coefficient column", 1);
  const bool has_offset = names.back() == "offset";
  const std::size_t d = names.size() - (has_offset ? 1 : 0);
  if (d == 0)
    throw ParseError("dictionary file needs at least one coefficient column", 1);
  const auto rows = read_numeric_rows(in, names.size(), 2);
  if (rows.empty())
    throw ParseError("no data rows", 2);
  Dictionary dict;
  dict.coeffs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  dict.offsets = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j)
      dict.coeffs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (has_offset)
      dict.offsets(static_cast<Eigen::Index>(i)) = rows[i][d];
  }
  return dict;
}

void write_dictionary_csv(const std::string& path, const Dictionary& dict) {
  std::ofstream out(path);
  if (!out)
    throw ParseError("cannot open '" + path + "' for writing");
  for (std::size_t j = 1; j <= dict.dim(); ++j)
    out << "a" << j << (j == dict.dim() ? "" : ",");
  out << ",offset\n";
  for (std::size_t i = 0; i < dict.size(); ++i) {
    for (std::size_t j = 0; j < dict.dim(); ++j)
      out << format_double(dict.coeffs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << ",";
    out << format_double(dict.offsets(static_cast<Eigen::Index>(i))) << "\n";
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw NumericError("double formatting failed");
  return std::string(buf, p);
}

std::vector<double> column_vector(const EvaluationMatrix& eval, std::size_t j) {
  if (j >= eval.cols())
    throw ConfigError("column index: out of range");
  std::vector<double> out(eval.rows());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = eval.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ParseError("cannot open '" + tmp + "' for writing");
    out << text;
    if (!out.flush())
      throw ParseError("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ParseError("cannot rename '" + tmp + "' to '" + path + "'");
}

} // namespace starmid
