#include "blindspot/cooccur/cooccur.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blindspot/error.hpp"

namespace blindspot::cooccur {

CooccurrenceMatrix cooccurrence(const rasae::SparseCodeMatrix& codes)
{
    const auto k = static_cast<Eigen::Index>(codes.n_concepts());
    CooccurrenceMatrix c = CooccurrenceMatrix::Zero(k, k);
    for (std::size_t r = 0; r < codes.rows(); ++r) {
        const auto row = codes.row(r);
        for (const auto& a : row) {
            for (const auto& b : row) {
                c(a.index, b.index) += a.activation * b.activation;
            }
        }
    }
    return c;
}

std::vector<L0Point> l0_curve(const CooccurrenceMatrix& c, std::span<const double> epsilons)
{
    if (!std::is_sorted(epsilons.begin(), epsilons.end())) {
        throw Error(ErrorKind::Argument, "epsilons must be sorted ascending");
    }
    std::vector<double> flat(c.data(), c.data() + c.size());
    std::sort(flat.begin(), flat.end());
    std::vector<L0Point> out;
    out.reserve(epsilons.size());
    for (double eps : epsilons) {
        const auto it = std::upper_bound(flat.begin(), flat.end(), eps);
        out.push_back({eps, static_cast<std::size_t>(flat.end() - it)});
    }
    return out;
}

std::size_t unique_entries(const CooccurrenceMatrix& c_gen, const CooccurrenceMatrix& c_real, double epsilon)
{
    if (c_gen.rows() != c_real.rows() || c_gen.cols() != c_real.cols()) {
        throw Error(ErrorKind::Shape, "co-occurrence matrices differ in shape (" + std::to_string(c_gen.rows()) +
                                          " vs " + std::to_string(c_real.rows()) + ")");
    }
    return static_cast<std::size_t>(((c_gen.array() > epsilon) && (c_real.array() <= epsilon)).count());
}

namespace {

void fix_signs(Eigen::MatrixXd& v)
{
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index arg = 0;
        v.col(j).cwiseAbs().maxCoeff(&arg);
        if (v(arg, j) < 0) {
            v.col(j) = -v.col(j);
        }
    }
}

Eigenpairs dense_top(const CooccurrenceMatrix& c, std::size_t top)
{
    const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::Numeric, "symmetric eigendecomposition failed to converge");
    }
    const auto n = sym.rows();
    const auto t = static_cast<Eigen::Index>(top);
    Eigenpairs out{Eigen::VectorXd(t), Eigen::MatrixXd(n, t)};
    for (Eigen::Index j = 0; j < t; ++j) {
        out.values(j) = es.eigenvalues()(n - 1 - j);
        out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
    }
    return out;
}

// Orthogonal iteration with a Rayleigh-Ritz step. Assumes c is PSD, as any Z^T Z is.
Eigenpairs subspace_top(const CooccurrenceMatrix& c, std::size_t top, const EigenOptions& opts)
{
    const auto n = c.rows();
    const auto t = static_cast<Eigen::Index>(top);
    const auto block = std::min<Eigen::Index>(n, t + std::max<Eigen::Index>(8, t / 2));
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, block);
    // Fixed quasi-random start keeps the result deterministic.
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < block; ++j) {
            q(i, j) = std::sin(static_cast<double>((i + 1) * (j + 3)) * 0.7548776662466927);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        const Eigen::MatrixXd z = c * q;
        const Eigen::MatrixXd h = q.transpose() * z;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
        const Eigen::MatrixXd rot = es.eigenvectors().rowwise().reverse();
        const Eigen::MatrixXd ritz = q * rot;
        const Eigen::MatrixXd c_ritz = z * rot;
        const Eigen::VectorXd vals = es.eigenvalues().reverse();

        const double scale = std::max(std::abs(vals(0)), 1e-300);
        const Eigen::MatrixXd resid =
            c_ritz.leftCols(t) - ritz.leftCols(t) * vals.head(t).asDiagonal();
        const double worst = resid.colwise().norm().maxCoeff() / scale;
        if (worst <= opts.tolerance) {
            return {vals.head(t), ritz.leftCols(t)};
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> step(c_ritz);
        q = step.householderQ() * Eigen::MatrixXd::Identity(n, block);
    }
    throw Error(ErrorKind::Numeric, "subspace iteration did not converge after " +
                                        std::to_string(opts.max_iterations) + " iterations");
}

} // namespace

Eigenpairs eigenspectrum(const CooccurrenceMatrix& c, std::size_t top, const EigenOptions& opts)
{
    if (c.rows() != c.cols()) {
        throw Error(ErrorKind::Shape, "co-occurrence matrix must be square");
    }
    if (top > static_cast<std::size_t>(c.rows())) {
        throw Error(ErrorKind::Argument, "requested " + std::to_string(top) + " eigenpairs of a " +
                                             std::to_string(c.rows()) + "-dimensional matrix");
    }
    if (!c.allFinite()) {
        throw Error(ErrorKind::Numeric, "co-occurrence matrix has non-finite entries");
    }
    Eigenpairs out = static_cast<std::size_t>(c.rows()) <= opts.dense_limit ? dense_top(c, top)
                                                                            : subspace_top(c, top, opts);
    fix_signs(out.vectors);
    return out;
}

Eigen::MatrixXd eigvec_similarity(const Eigen::MatrixXd& real_vecs, const Eigen::MatrixXd& gen_vecs, std::size_t top)
{
    if (real_vecs.rows() != gen_vecs.rows()) {
        throw Error(ErrorKind::Shape, "eigenvector bases live in different dimensions");
    }
    const auto t = static_cast<Eigen::Index>(top);
    if (t > real_vecs.cols() || t > gen_vecs.cols()) {
        throw Error(ErrorKind::Argument, "top exceeds the number of available eigenvectors");
    }
    Eigen::MatrixXd a = real_vecs.leftCols(t);
    Eigen::MatrixXd b = gen_vecs.leftCols(t);
    a.colwise().normalize();
    b.colwise().normalize();
    return (a.transpose() * b).cwiseAbs().cwiseMin(1.0);
}

} // namespace blindspot::cooccur
