#pragma once

#include <optional>

#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::rasae {

using tensorio::RowMajorD;

/// Archetypal parameterization: archetype_j = (W * anchors)_j + relaxation_j,
/// with W row-stochastic. The unit-norm atom is the archetype's direction.
struct ArchetypalPart {
    RowMajorD weights;    // K' x m, rows on the simplex
    RowMajorD anchors;    // m x d
    RowMajorD relaxation; // K' x d, row norms <= relaxation_bound
};

/// Concept atoms as K' rows of length d.
struct Dictionary {
    RowMajorD atoms;
    std::optional<ArchetypalPart> archetypal;

    std::size_t n_concepts() const noexcept { return static_cast<std::size_t>(atoms.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(atoms.cols()); }

    /// W * anchors + relaxation (archetypal dictionaries only).
    RowMajorD archetypes() const;

    /// Throws Validation when a structural invariant is violated.
    void check_invariants(double relaxation_bound, double tol = 1e-5) const;
};

} // namespace blindspot::rasae
