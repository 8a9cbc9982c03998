#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace fracjko {

// Gauss-Legendre nodes/weights on [a, b]. Newton on P_n, fine up to n ~ 200.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    std::vector<double> x(n), w(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = w[n - 1 - i] = half * wi;
    }
    return {x, w};
}

}  // namespace fracjko
