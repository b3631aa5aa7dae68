#include "gmmpower/panel.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "gmmpower/csv.hpp"
#include "gmmpower/error.hpp"

namespace gmmpower {

PanelData::PanelData(Eigen::Index n_subjects, Eigen::Index n_times) : n_(n_subjects), t_(n_times) {
  if (n_subjects < 1 || n_times < 1) throw InvalidParameter("panel needs at least one subject and one time point");
  outcome_ = Matrix::Zero(n_, t_);
}

void PanelData::check_shape(const Matrix& m, const std::string& name) const {
  if (m.rows() != n_ || m.cols() != t_)
    throw DimensionMismatch("series '" + name + "' is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                            ", panel is " + std::to_string(n_) + "x" + std::to_string(t_));
  if (!m.allFinite()) throw InvalidParameter("series '" + name + "' has non-finite values");
}

void PanelData::set_outcome(Matrix y) {
  check_shape(y, std::string(kOutcomeName));
  outcome_ = std::move(y);
}

void PanelData::add_covariate(const std::string& name, Matrix values) {
  if (name.empty() || name == kOutcomeName || name == "intercept")
    throw InvalidParameter("invalid covariate name '" + name + "'");
  check_shape(values, name);
  if (!covariates_.contains(name)) covariate_order_.push_back(name);
  covariates_[name] = std::move(values);
}

void PanelData::set_pre_sample(const std::string& name, Vector values) {
  if (values.size() != n_)
    throw DimensionMismatch("pre-sample '" + name + "' has " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(n_));
  if (!values.allFinite()) throw InvalidParameter("pre-sample '" + name + "' has non-finite values");
  pre_sample_[name] = std::move(values);
}

void PanelData::set_subject_ids(std::vector<std::string> ids) {
  if (static_cast<Eigen::Index>(ids.size()) != n_) throw DimensionMismatch("subject id count does not match panel");
  subject_ids_ = std::move(ids);
}

const Matrix& PanelData::series(std::string_view name) const {
  if (name == kOutcomeName) return outcome_;
  auto it = covariates_.find(name);
  if (it == covariates_.end()) throw SpecificationError("unknown series '" + std::string(name) + "'");
  return it->second;
}

bool PanelData::has_series(std::string_view name) const {
  return name == kOutcomeName || covariates_.find(name) != covariates_.end();
}

const Vector* PanelData::pre_sample(std::string_view name) const {
  auto it = pre_sample_.find(name);
  return it == pre_sample_.end() ? nullptr : &it->second;
}

PanelData PanelData::select_subjects(const std::vector<Eigen::Index>& order) const {
  if (order.empty()) throw DimensionMismatch("subject selection is empty");
  for (Eigen::Index i : order)
    if (i < 0 || i >= n_) throw InvalidParameter("subject index out of range: " + std::to_string(i));
  const auto m_out = static_cast<Eigen::Index>(order.size());
  auto rows = [&](const Matrix& m) {
    Matrix out(m_out, m.cols());
    for (Eigen::Index i = 0; i < m_out; ++i) out.row(i) = m.row(order[static_cast<std::size_t>(i)]);
    return out;
  };
  PanelData out(m_out, t_);
  out.outcome_ = rows(outcome_);
  out.covariate_order_ = covariate_order_;
  for (const auto& [name, m] : covariates_) out.covariates_[name] = rows(m);
  for (const auto& [name, v] : pre_sample_) {
    Vector pv(m_out);
    for (Eigen::Index i = 0; i < m_out; ++i) pv(i) = v(order[static_cast<std::size_t>(i)]);
    out.pre_sample_[name] = pv;
  }
  if (!subject_ids_.empty()) {
    out.subject_ids_.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      out.subject_ids_[i] = subject_ids_[static_cast<std::size_t>(order[i])];
  }
  return out;
}

PanelData PanelData::with_outcome(Matrix y) const {
  PanelData out = *this;
  out.set_outcome(std::move(y));
  return out;
}

std::string_view to_string(CovariateType type) {
  switch (type) {
    case CovariateType::TimeIndependent: return "TimeIndependent";
    case CovariateType::TypeI: return "TypeI";
    case CovariateType::TypeII: return "TypeII";
    case CovariateType::TypeIII: return "TypeIII";
    case CovariateType::Predetermined: return "Predetermined";
  }
  return "?";
}

CovariateType covariate_type_from_string(std::string_view name) {
  for (auto t : {CovariateType::TimeIndependent, CovariateType::TypeI, CovariateType::TypeII, CovariateType::TypeIII,
                 CovariateType::Predetermined})
    if (name == to_string(t)) return t;
  throw InvalidParameter("unknown covariate type '" + std::string(name) + "'");
}

Term Term::parse(std::string_view text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw SpecificationError("empty regressor term");
  if (s == "intercept" || s == "1") return intercept();
  if (s.starts_with("lag(") && s.ends_with(")")) {
    const auto inner = std::string_view(s).substr(4, s.size() - 5);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos || comma == 0)
      throw SpecificationError("malformed lag term '" + std::string(text) + "'");
    long long k = 0;
    if (!parse_int(inner.substr(comma + 1), k) || k < 1)
      throw SpecificationError("lag order must be a positive integer in '" + std::string(text) + "'");
    return lagged(std::string(inner.substr(0, comma)), static_cast<int>(k));
  }
  if (s.find_first_of("(),") != std::string::npos) throw SpecificationError("malformed regressor term '" + s + "'");
  return series(s);
}

std::string Term::label() const {
  switch (kind) {
    case Kind::Intercept: return "intercept";
    case Kind::Series: return name;
    case Kind::Lag: return "lag(" + name + "," + std::to_string(lag) + ")";
  }
  return name;
}

Hypothesis Hypothesis::select(Eigen::Index p, Eigen::Index j, double value) {
  if (j < 0 || j >= p) throw InvalidHypothesis("selected coefficient out of range");
  Hypothesis h;
  h.H = Matrix::Zero(1, p);
  h.H(0, j) = 1.0;
  h.h0 = Vector::Constant(1, value);
  return h;
}

CovariateType ModelSpec::type_of(const Term& term) const {
  if (term.kind == Term::Kind::Intercept) return CovariateType::TimeIndependent;
  auto it = covariate_types.find(term.name);
  if (it == covariate_types.end())
    throw SpecificationError("no covariate type given for '" + term.name + "' (term " + term.label() + ")");
  return it->second;
}

std::vector<std::string> ModelSpec::labels() const {
  std::vector<std::string> out;
  out.reserve(regressors.size());
  for (const auto& t : regressors) out.push_back(t.label());
  return out;
}

void ModelSpec::validate(const PanelData& data) const {
  if (regressors.empty()) throw SpecificationError("model has no regressors");
  for (const auto& term : regressors) {
    (void)type_of(term);
    if (term.kind == Term::Kind::Intercept) continue;
    if (!data.has_series(term.name)) throw SpecificationError("term " + term.label() + " references unknown series");
    if (term.kind == Term::Kind::Lag) {
      if (term.lag > 1) throw SpecificationError("term " + term.label() + ": only one pre-sample period is stored");
      if (data.pre_sample(term.name) == nullptr)
        throw SpecificationError("term " + term.label() + " needs pre-sample (time 0) values");
    }
  }
  if (hypothesis) {
    const auto& h = *hypothesis;
    if (h.H.cols() != p())
      throw InvalidHypothesis("hypothesis matrix has " + std::to_string(h.H.cols()) + " columns, model has " +
                              std::to_string(p()) + " coefficients");
    if (h.h0.size() != h.H.rows()) throw InvalidHypothesis("h0 length does not match hypothesis rows");
    if (h.H.rows() < 1 || h.H.rows() > p()) throw InvalidHypothesis("hypothesis must have 1..p rows");
    if (null_space(h.H).rank != h.H.rows()) throw InvalidHypothesis("hypothesis matrix is rank deficient");
  }
}

namespace {

double term_value(const PanelData& data, const Term& term, Eigen::Index i, Eigen::Index t) {
  switch (term.kind) {
    case Term::Kind::Intercept: return 1.0;
    case Term::Kind::Series: return data.series(term.name)(i, t - 1);
    case Term::Kind::Lag: {
      const Eigen::Index src = t - term.lag;
      if (src >= 1) return data.series(term.name)(i, src - 1);
      if (src == 0) {
        if (const Vector* pre = data.pre_sample(term.name)) return (*pre)(i);
      }
      throw SpecificationError("cannot resolve " + term.label() + " at t=" + std::to_string(t) +
                               ": missing pre-sample value");
    }
  }
  return 0.0;
}

}  // namespace

Vector design_row(const PanelData& data, const ModelSpec& spec, Eigen::Index i, Eigen::Index t) {
  if (t < 1 || t > data.n_times()) throw InvalidParameter("time index out of range: " + std::to_string(t));
  if (i < 0 || i >= data.n_subjects()) throw InvalidParameter("subject index out of range: " + std::to_string(i));
  Vector row(spec.p());
  for (Eigen::Index j = 0; j < spec.p(); ++j) row(j) = term_value(data, spec.regressors[static_cast<std::size_t>(j)], i, t);
  return row;
}

Matrix design_matrix(const PanelData& data, const ModelSpec& spec) {
  const Eigen::Index n = data.n_subjects();
  const Eigen::Index T = data.n_times();
  Matrix x(n * T, spec.p());
  for (Eigen::Index j = 0; j < spec.p(); ++j) {
    const Term& term = spec.regressors[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index t = 1; t <= T; ++t) x(i * T + t - 1, j) = term_value(data, term, i, t);
  }
  return x;
}

double marginal_mean(const Vector& beta, const Vector& row, Link link) {
  if (beta.size() != row.size())
    throw DimensionMismatch("marginal_mean: beta has " + std::to_string(beta.size()) + " entries, row has " +
                            std::to_string(row.size()));
  switch (link) {
    case Link::Identity: return row.dot(beta);
  }
  return 0.0;
}

Matrix residuals(const Vector& beta, const PanelData& data, const ModelSpec& spec) {
  if (beta.size() != spec.p())
    throw DimensionMismatch("residuals: beta has " + std::to_string(beta.size()) + " entries, model has " +
                            std::to_string(spec.p()));
  const Eigen::Index n = data.n_subjects();
  const Eigen::Index T = data.n_times();
  const Matrix x = design_matrix(data, spec);
  const Vector mu = x * beta;
  Matrix u(n, T);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < T; ++t) u(i, t) = data.outcome()(i, t) - mu(i * T + t);
  return u;
}

PanelData read_panel_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataFormatError("empty input", 0);
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "subject" || header[1] != "time" || header.back() != kOutcomeName)
    throw DataFormatError("header must be 'subject,time,<covariates...>,y'", line_no);
  const std::size_t n_cov = header.size() - 3;
  std::vector<std::string> names(header.begin() + 2, header.end() - 1);
  for (std::size_t a = 0; a < names.size(); ++a) {
    if (names[a].empty() || names[a] == "intercept") throw DataFormatError("invalid covariate column name", line_no);
    for (std::size_t b = 0; b < a; ++b)
      if (names[a] == names[b]) throw DataFormatError("duplicate column '" + names[a] + "'", line_no);
  }

  struct Cell {
    std::vector<std::optional<double>> values;  // covariates..., y
    std::size_t line = 0;
  };
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::map<long long, Cell>> rows;
  long long max_time = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataFormatError("expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(fields.size()),
                            line_no);
    long long t = 0;
    if (!parse_int(fields[1], t) || t < 0) throw DataFormatError("time must be a non-negative integer", line_no);
    if (fields[0].empty()) throw DataFormatError("missing subject id", line_no);
    auto [it, inserted] = index.try_emplace(fields[0], ids.size());
    if (inserted) {
      ids.push_back(fields[0]);
      rows.emplace_back();
    }
    auto& subject = rows[it->second];
    if (subject.contains(t))
      throw DataFormatError("duplicate row for subject '" + fields[0] + "' at time " + std::to_string(t), line_no);
    Cell cell;
    cell.line = line_no;
    cell.values.resize(n_cov + 1);
    for (std::size_t c = 0; c <= n_cov; ++c) {
      const std::string& f = fields[c + 2];
      if (f.empty() && t == 0) continue;
      double v = 0.0;
      if (!parse_double(f, v) || !std::isfinite(v))
        throw DataFormatError("column '" + header[c + 2] + "' is not a finite number", line_no);
      cell.values[c] = v;
    }
    subject.emplace(t, std::move(cell));
    max_time = std::max(max_time, t);
  }
  if (ids.empty()) throw DataFormatError("no data rows", line_no);
  if (max_time < 1) throw DataFormatError("no observations with time >= 1", line_no);

  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto T = static_cast<Eigen::Index>(max_time);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (long long t = 1; t <= max_time; ++t)
      if (!rows[i].contains(t))
        throw DataFormatError("unbalanced panel: subject '" + ids[i] + "' has no row for time " + std::to_string(t),
                              rows[i].begin()->second.line);

  PanelData data(n, T);
  std::vector<Matrix> series(n_cov + 1, Matrix(n, T));
  std::vector<Vector> pre(n_cov + 1, Vector(n));
  std::vector<Eigen::Index> pre_count(n_cov + 1, 0);
  std::vector<std::size_t> first_missing_line(n_cov + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& subject = rows[static_cast<std::size_t>(i)];
    for (const auto& [t, cell] : subject) {
      for (std::size_t c = 0; c <= n_cov; ++c) {
        if (t == 0) {
          if (cell.values[c]) {
            pre[c](i) = *cell.values[c];
            ++pre_count[c];
          } else if (first_missing_line[c] == 0) {
            first_missing_line[c] = cell.line;
          }
        } else {
          series[c](i, t - 1) = *cell.values[c];
        }
      }
    }
  }
  for (std::size_t c = 0; c < n_cov; ++c) data.add_covariate(names[c], std::move(series[c]));
  data.set_outcome(std::move(series[n_cov]));
  for (std::size_t c = 0; c <= n_cov; ++c) {
    if (pre_count[c] == 0) continue;
    if (pre_count[c] != n)
      throw DataFormatError("pre-sample values for '" + header[c + 2] + "' are missing for some subjects",
                            first_missing_line[c]);
    data.set_pre_sample(c == n_cov ? std::string(kOutcomeName) : names[c], std::move(pre[c]));
  }
  data.set_subject_ids(std::move(ids));
  return data;
}

PanelData read_panel_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open '" + path + "'", 0);
  return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const PanelData& data) {
  const auto& names = data.covariate_names();
  out << "subject,time";
  for (const auto& n : names) out << ',' << n;
  out << ",y\n";
  std::vector<const Vector*> pre;
  bool any_pre = false;
  for (const auto& n : names) {
    pre.push_back(data.pre_sample(n));
    any_pre = any_pre || pre.back();
  }
  const Vector* pre_y = data.pre_sample(kOutcomeName);
  any_pre = any_pre || pre_y;

  for (Eigen::Index i = 0; i < data.n_subjects(); ++i) {
    const std::string id =
        data.subject_ids().empty() ? std::to_string(i + 1) : data.subject_ids()[static_cast<std::size_t>(i)];
    if (any_pre) {
      out << id << ",0";
      for (const Vector* p : pre) out << ',' << (p ? format_double((*p)(i)) : std::string());
      out << ',' << (pre_y ? format_double((*pre_y)(i)) : std::string()) << '\n';
    }
    for (Eigen::Index t = 1; t <= data.n_times(); ++t) {
      out << id << ',' << t;
      for (const auto& n : names) out << ',' << format_double(data.series(n)(i, t - 1));
      out << ',' << format_double(data.outcome()(i, t - 1)) << '\n';
    }
  }
}

}  // namespace gmmpower
