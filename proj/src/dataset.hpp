#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"

namespace pnest {

enum class OutcomeKind { binary, continuous };

const char* outcome_kind_name(OutcomeKind k);
OutcomeKind outcome_kind_from_name(const std::string& name);

// One sampled individual. Rows with s = 0 carry baseline data only; the
// non-nested part (p = 1) contains no non-randomized individuals, so
// p = 1 forces s = 1.
struct Observation {
  std::vector<double> x;
  int p = 0;
  int s = 0;
  std::optional<int> a;
  std::optional<double> y;
};

class PartialNestDataset {
 public:
  static PartialNestDataset from_rows(std::vector<Observation> rows,
                                      std::vector<std::string> covariate_names,
                                      OutcomeKind kind);

  int n() const { return static_cast<int>(obs_.size()); }
  int n0() const { return n0_; }
  int n1() const { return n1_; }
  int dim() const { return static_cast<int>(names_.size()); }
  OutcomeKind outcome_kind() const { return kind_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::vector<Observation>& rows() const { return obs_; }

  // Column views over all rows, fixed at validation time. a() is -1 and
  // y() is NaN where the field is absent (s = 0 rows).
  const Eigen::MatrixXd& covariates() const { return X_; }
  const Eigen::VectorXi& p() const { return p_; }
  const Eigen::VectorXi& s() const { return s_; }
  const Eigen::VectorXi& a() const { return a_; }
  const Eigen::VectorXd& y() const { return y_; }

 private:
  std::vector<Observation> obs_;
  std::vector<std::string> names_;
  OutcomeKind kind_ = OutcomeKind::binary;
  int n0_ = 0, n1_ = 0;
  Eigen::MatrixXd X_;
  Eigen::VectorXi p_, s_, a_;
  Eigen::VectorXd y_;
};

// CSV ingestion. Header row required; the named covariate columns plus
// p, s, a, y must all be present. Missing a/y are empty fields; any
// other missing-value sentinel is rejected.
PartialNestDataset parse_csv(const std::string& path,
                             const std::vector<std::string>& covariate_columns,
                             OutcomeKind kind);
PartialNestDataset parse_csv_stream(std::istream& in, const std::string& origin,
                                    const std::vector<std::string>& covariate_columns,
                                    OutcomeKind kind);

// Writes covariate columns then p,s,a,y, one header row, empty fields
// for absent a/y. parse of the output reproduces the dataset exactly.
void serialize_csv(const PartialNestDataset& data, std::ostream& out);

// Reads the header of a CSV file and returns every column name except
// p, s, a, y, preserving file order.
std::vector<std::string> csv_covariate_columns(const std::string& path);

struct DesignMatrix {
  Eigen::MatrixXd F;            // intercept column prepended
  std::vector<int> row_indices; // back-map into the dataset
};

// Design matrix over the rows selected by `subset`, using the covariate
// columns listed in `cols` (all covariates when nullptr).
DesignMatrix design_matrix(const PartialNestDataset& data,
                           const std::function<bool(const Observation&)>& subset,
                           const std::vector<int>* cols = nullptr);

}  // namespace pnest
