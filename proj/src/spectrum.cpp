#include "mmicap/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmicap/error.hpp"

namespace mmicap {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kDefiniteRatio = 1e-12;

}  // namespace

Spectrum::Spectrum(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "spectrum must contain at least one eigenvalue");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw Error(ErrorCode::NonPositiveEigenvalue,
                  "eigenvalue " + std::to_string(v) + " is not a finite positive number");
    }
  }
  std::sort(values_.begin(), values_.end(), std::greater<>());
}

Spectrum Spectrum::top(std::size_t n) const {
  if (n == 0 || n > values_.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "cannot take top " + std::to_string(n) + " of " +
                                                std::to_string(values_.size()) + " eigenvalues");
  }
  return Spectrum(std::vector<double>(values_.begin(), values_.begin() + static_cast<long>(n)));
}

Spectrum Spectrum::scaled(double factor) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= factor;
  return Spectrum(std::move(out));
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance must be a non-empty square matrix");
  }
  if (!entries_.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "covariance has non-finite entries");
  }
  const double scale = std::max(entries_.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw Error(ErrorCode::NotSymmetric, "max |A - A^T| = " + std::to_string(asym));
  }
  entries_ = 0.5 * (entries_ + entries_.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(entries_, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  if (ev.minCoeff() <= kDefiniteRatio * ev.maxCoeff()) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "smallest eigenvalue " + std::to_string(ev.minCoeff()) + " is not positive");
  }
}

CovarianceMatrix CovarianceMatrix::diagonal(const Spectrum& spectrum) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(spectrum.size()));
  for (std::size_t i = 0; i < spectrum.size(); ++i) d(static_cast<Eigen::Index>(i)) = spectrum[i];
  return CovarianceMatrix(d.asDiagonal().toDenseMatrix());
}

CovarianceMatrix BlockCovariance::expand() const {
  const Eigen::Index nb = block.dim();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(full_dim(), full_dim());
  for (int r = 0; r < repetitions; ++r) full.block(r * nb, r * nb, nb, nb) = block.matrix();
  return CovarianceMatrix(std::move(full));
}

Eigensystem eigvals_from_covariance(const CovarianceMatrix& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov.matrix());
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "eigendecomposition failed");
  }
  // Eigen orders ascending; flip to descending.
  const Eigen::Index n = cov.dim();
  std::vector<double> values(static_cast<std::size_t>(n));
  Eigen::MatrixXd vectors(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values[static_cast<std::size_t>(i)] = solver.eigenvalues()(n - 1 - i);
    vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return Eigensystem{Spectrum(std::move(values)), std::move(vectors)};
}

Eigensystem diagonal_eigensystem(const Spectrum& spectrum) {
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  return Eigensystem{spectrum, Eigen::MatrixXd::Identity(n, n)};
}

Spectrum model_spectrum(const SpectrumModel& model, std::size_t n) {
  return std::visit(
      [n](const auto& m) -> Spectrum {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Explicit>) {
          if (n != 0 && n != m.values.size()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "explicit spectrum has " + std::to_string(m.values.size()) +
                            " values, expected " + std::to_string(n));
          }
          return Spectrum(m.values);
        } else {
          if (n == 0) throw Error(ErrorCode::InvalidArgument, "spectrum length must be >= 1");
          std::vector<double> values(n);
          for (std::size_t i = 0; i < n; ++i) {
            const double idx = static_cast<double>(i + 1);
            if constexpr (std::is_same_v<T, ExpDecay>) {
              if (!(m.rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "decay rate must be > 0");
              values[i] = std::exp(-m.rate * (idx - 1.0));
            } else {
              values[i] = 1.0 / idx;
            }
          }
          return Spectrum(std::move(values));
        }
      },
      model);
}

CovarianceMatrix read_covariance_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw Error(ErrorCode::ParseError, "covariance CSV is empty");
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != n) {
      throw Error(ErrorCode::DimensionMismatch, "covariance CSV row " + std::to_string(r + 1) + " has " +
                                                    std::to_string(row.size()) + " columns, expected " +
                                                    std::to_string(n));
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return CovarianceMatrix(std::move(m));
}

CovarianceMatrix read_covariance_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open covariance file '" + path + "'");
  return read_covariance_csv(in);
}

Spectrum spectrum_from_json(const nlohmann::json& doc) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    const std::size_t n = doc.contains("n") ? doc.at("n").get<std::size_t>() : 0;
    if (kind == "exp_decay") return model_spectrum(ExpDecay{doc.at("rate").get<double>()}, n);
    if (kind == "harmonic") return model_spectrum(Harmonic{}, n);
    if (kind == "explicit") return model_spectrum(Explicit{doc.at("values").get<std::vector<double>>()}, n);
    throw Error(ErrorCode::ParseError, "unknown spectrum kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("spectrum document: ") + e.what());
  }
}

}  // namespace mmicap
