#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blindspot/rasae/sparse_codes.hpp"

namespace blindspot::cooccur {

/// Concept-by-concept co-activation Z^T Z.
using CooccurrenceMatrix = Eigen::MatrixXd;

/// Accumulated from per-row sparse outer products.
CooccurrenceMatrix cooccurrence(const rasae::SparseCodeMatrix& codes);

struct L0Point {
    double epsilon = 0.0;
    std::size_t count = 0;
};

/// Entries strictly greater than each epsilon. Epsilons must be ascending.
std::vector<L0Point> l0_curve(const CooccurrenceMatrix& c, std::span<const double> epsilons);

/// Index pairs with c_gen > eps and c_real <= eps.
std::size_t unique_entries(const CooccurrenceMatrix& c_gen, const CooccurrenceMatrix& c_real, double epsilon);

struct Eigenpairs {
    Eigen::VectorXd values;  // descending
    Eigen::MatrixXd vectors; // unit columns, largest-|component| entry positive
};

struct EigenOptions {
    std::size_t dense_limit = 4096; // above this, top eigenpairs come from subspace iteration
    double tolerance = 1e-8;
    int max_iterations = 5000;
};

Eigenpairs eigenspectrum(const CooccurrenceMatrix& c, std::size_t top, const EigenOptions& opts = {});

/// |cos| between the first `top` columns of each basis.
Eigen::MatrixXd eigvec_similarity(const Eigen::MatrixXd& real_vecs, const Eigen::MatrixXd& gen_vecs,
                                  std::size_t top = 100);

} // namespace blindspot::cooccur
