#pragma once

#include "fracjko/core.hpp"

#include <vector>

namespace fracjko {

// Pool-adjacent-violators: Euclidean (optionally weighted) projection of y
// onto nondecreasing sequences.
template <typename Derived>
VectorX<typename Derived::Scalar> isotonic_projection(const Eigen::MatrixBase<Derived>& y,
                                                      const VectorX<typename Derived::Scalar>* w = nullptr) {
    using Scalar = typename Derived::Scalar;
    const Index n = y.size();
    std::vector<Scalar> val, wt;
    std::vector<Index> len;
    val.reserve(size_t(n));
    for (Index i = 0; i < n; ++i) {
        val.push_back(y(i));
        wt.push_back(w ? (*w)(i) : Scalar(1));
        len.push_back(1);
        while (val.size() > 1 && val[val.size() - 2] > val.back()) {
            const size_t k = val.size() - 1;
            const Scalar W = wt[k - 1] + wt[k];
            val[k - 1] = (wt[k - 1] * val[k - 1] + wt[k] * val[k]) / W;
            wt[k - 1] = W;
            len[k - 1] += len[k];
            val.pop_back(), wt.pop_back(), len.pop_back();
        }
    }
    VectorX<Scalar> out(n);
    Index pos = 0;
    for (size_t b = 0; b < val.size(); ++b)
        for (Index r = 0; r < len[b]; ++r) out(pos++) = val[b];
    return out;
}

}  // namespace fracjko
