#include "diffstab/linalg.hpp"

#include <algorithm>
#include <limits>

namespace diffstab {

std::vector<std::pair<Complex, int>> cluster_points(std::vector<Complex> pts, double tol) {
    std::vector<std::pair<Complex, int>> clusters;
    std::sort(pts.begin(), pts.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) {
            return a.real() < b.real();
        }
        return a.imag() < b.imag();
    });
    std::vector<bool> used(pts.size(), false);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (used[i]) {
            continue;
        }
        Complex sum = pts[i];
        int count = 1;
        used[i] = true;
        bool grew = true;
        while (grew) {
            grew = false;
            const Complex centroid = sum / static_cast<double>(count);
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (!used[j] && std::abs(pts[j] - centroid) <= tol) {
                    sum += pts[j];
                    ++count;
                    used[j] = true;
                    grew = true;
                }
            }
        }
        clusters.emplace_back(sum / static_cast<double>(count), count);
    }
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
        if (a.first.real() != b.first.real()) {
            return a.first.real() < b.first.real();
        }
        return a.first.imag() < b.first.imag();
    });
    return clusters;
}

std::vector<Complex> eigenvalues(const Eigen::MatrixXd& a) {
    if (a.rows() == 0) {
        return {};
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
    std::vector<Complex> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    }
    return out;
}

double spectral_abscissa(const Eigen::MatrixXd& a) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const Complex& ev : eigenvalues(a)) {
        worst = std::max(worst, ev.real());
    }
    return worst;
}

} // namespace diffstab
