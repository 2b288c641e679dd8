#include "blindspot/rasae/dictionary.hpp"

#include <cmath>
#include <string>

#include "blindspot/error.hpp"

namespace blindspot::rasae {

RowMajorD Dictionary::archetypes() const
{
    if (!archetypal) {
        throw Error(ErrorKind::Argument, "dictionary is not archetypal");
    }
    return archetypal->weights * archetypal->anchors + archetypal->relaxation;
}

void Dictionary::check_invariants(double relaxation_bound, double tol) const
{
    if (!atoms.allFinite()) {
        throw Error(ErrorKind::Validation, "dictionary atoms contain non-finite values");
    }
    if (!archetypal) {
        return;
    }
    const auto& w = archetypal->weights;
    if (w.rows() != atoms.rows() || archetypal->anchors.rows() != w.cols() ||
        archetypal->anchors.cols() != atoms.cols() || archetypal->relaxation.rows() != atoms.rows() ||
        archetypal->relaxation.cols() != atoms.cols()) {
        throw Error(ErrorKind::Validation, "archetypal dictionary has inconsistent shapes");
    }
    if ((w.array() < 0.0).any()) {
        throw Error(ErrorKind::Validation, "archetypal weights contain negative entries");
    }
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
        const double s = w.row(j).sum();
        if (std::abs(s - 1.0) > 1e-6) {
            throw Error(ErrorKind::Validation, "archetypal weight row " + std::to_string(j) + " sums to " +
                                                   std::to_string(s));
        }
        if (archetypal->relaxation.row(j).norm() > relaxation_bound * (1.0 + 1e-12) + 1e-12) {
            throw Error(ErrorKind::Validation, "relaxation row " + std::to_string(j) + " exceeds bound");
        }
    }
    const RowMajorD u = archetypes();
    for (Eigen::Index j = 0; j < u.rows(); ++j) {
        const double n = u.row(j).norm();
        if (n == 0.0) {
            continue;
        }
        if ((atoms.row(j) - u.row(j) / n).cwiseAbs().maxCoeff() > tol) {
            throw Error(ErrorKind::Validation, "atom " + std::to_string(j) + " is not the direction of its archetype");
        }
    }
}

} // namespace blindspot::rasae
