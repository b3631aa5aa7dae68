#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmmpower/linalg.hpp"

namespace gmmpower {

inline constexpr std::string_view kOutcomeName = "y";

// Balanced long-format panel: every subject observed at t = 1..T. Series are
// stored as n x T matrices (column t-1 holds time t). Pre-sample (t = 0) values
// are optional per series and only needed when a lag reaches back to t = 0.
class PanelData {
 public:
  PanelData(Eigen::Index n_subjects, Eigen::Index n_times);

  Eigen::Index n_subjects() const noexcept { return n_; }
  Eigen::Index n_times() const noexcept { return t_; }

  void set_outcome(Matrix y);
  void add_covariate(const std::string& name, Matrix values);
  void set_pre_sample(const std::string& name, Vector values);
  void set_subject_ids(std::vector<std::string> ids);

  const Matrix& outcome() const noexcept { return outcome_; }
  const Matrix& series(std::string_view name) const;
  bool has_series(std::string_view name) const;
  const Vector* pre_sample(std::string_view name) const;
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_order_; }
  const std::vector<std::string>& subject_ids() const noexcept { return subject_ids_; }

  // Subjects order[0], order[1], ... (repeats allowed). Subject ids repeat too.
  PanelData select_subjects(const std::vector<Eigen::Index>& order) const;
  PanelData with_outcome(Matrix y) const;

 private:
  void check_shape(const Matrix& m, const std::string& name) const;

  Eigen::Index n_;
  Eigen::Index t_;
  Matrix outcome_;
  std::vector<std::string> covariate_order_;
  std::map<std::string, Matrix, std::less<>> covariates_;
  std::map<std::string, Vector, std::less<>> pre_sample_;
  std::vector<std::string> subject_ids_;
};

enum class CovariateType {
  TimeIndependent,
  TypeI,
  TypeII,
  TypeIII,
  // Lagged outcome: instrument at time s valid against residuals at t >= s.
  Predetermined,
};

std::string_view to_string(CovariateType type);
CovariateType covariate_type_from_string(std::string_view name);

struct Term {
  enum class Kind { Intercept, Series, Lag };
  Kind kind = Kind::Intercept;
  std::string name;
  int lag = 0;

  static Term intercept() { return {Kind::Intercept, "intercept", 0}; }
  static Term series(std::string name) { return {Kind::Series, std::move(name), 0}; }
  static Term lagged(std::string name, int k) { return {Kind::Lag, std::move(name), k}; }

  // Accepts "intercept", "<name>" and "lag(<name>,<k>)".
  static Term parse(std::string_view text);
  std::string label() const;
};

enum class Link { Identity };

struct Hypothesis {
  Matrix H;  // s x p, full row rank
  Vector h0;

  Eigen::Index df() const noexcept { return H.rows(); }
  // H selecting coefficient j, h0 = value.
  static Hypothesis select(Eigen::Index p, Eigen::Index j, double value = 0.0);
};

struct ModelSpec {
  Link link = Link::Identity;
  std::vector<Term> regressors;
  std::map<std::string, CovariateType, std::less<>> covariate_types;
  std::optional<Hypothesis> hypothesis;

  Eigen::Index p() const noexcept { return static_cast<Eigen::Index>(regressors.size()); }
  CovariateType type_of(const Term& term) const;
  std::vector<std::string> labels() const;

  // Checks every term against the data (including lag resolution at t = 1),
  // the type map, and the hypothesis shape and rank. Throws SpecificationError
  // or InvalidHypothesis.
  void validate(const PanelData& data) const;
};

// Regressor vector X_it in spec order; t is 1-based.
Vector design_row(const PanelData& data, const ModelSpec& spec, Eigen::Index i, Eigen::Index t);

// All design rows stacked: row i*T + (t-1) holds X_it.
Matrix design_matrix(const PanelData& data, const ModelSpec& spec);

double marginal_mean(const Vector& beta, const Vector& row, Link link = Link::Identity);

// U_it = y_it - mu_it(beta), as an n x T matrix.
Matrix residuals(const Vector& beta, const PanelData& data, const ModelSpec& spec);

// Long-format CSV: header "subject,time,<covariates...>,y"; time = 0 rows carry
// pre-sample values, where empty fields mean "not available". Throws
// DataFormatError with the offending line number.
PanelData read_panel_csv(std::istream& in);
PanelData read_panel_csv_file(const std::string& path);
void write_panel_csv(std::ostream& out, const PanelData& data);

}  // namespace gmmpower
