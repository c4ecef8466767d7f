#include "bdlab/genealogy.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace bdlab {

std::string Label::str() const {
    if (path_.empty()) return "∅";
    std::string out;
    for (size_t i = 0; i < path_.size(); ++i) {
        if (i) out += "·";
        out += std::to_string(path_[i]);
    }
    return out;
}

uint64_t Label::hash64() const {
    uint64_t h = 1469598103934665603ULL;
    for (uint32_t v : path_) {
        for (int b = 0; b < 4; ++b) {
            h ^= (v >> (8 * b)) & 0xFFu;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

bool is_strict_ancestor(const Label& ancestor, const Label& descendant) {
    const auto& a = ancestor.path();
    const auto& d = descendant.path();
    if (a.size() >= d.size()) return false;
    return std::equal(a.begin(), a.end(), d.begin());
}

int compare(const Label& a, const Label& b) {
    const auto& p = a.path();
    const auto& q = b.path();
    const size_t n = std::min(p.size(), q.size());
    for (size_t i = 0; i < n; ++i) {
        if (p[i] < q[i]) return -1;
        if (p[i] > q[i]) return 1;
    }
    if (p.size() == q.size()) return 0;
    throw std::invalid_argument("compare: one label is a strict ancestor of the other (" +
                                a.str() + ", " + b.str() + ")");
}

bool is_antichain(std::span<const Label> labels) {
    for (size_t i = 0; i < labels.size(); ++i)
        for (size_t j = 0; j < labels.size(); ++j)
            if (i != j && is_strict_ancestor(labels[i], labels[j])) return false;
    return true;
}

std::vector<size_t> order_indices(std::span<const Label> labels) {
    std::vector<size_t> perm(labels.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    std::sort(perm.begin(), perm.end(), [&](size_t i, size_t j) {
        return LabelLess{}(labels[i], labels[j]);
    });
    std::vector<size_t> rank(labels.size());
    for (size_t k = 0; k < perm.size(); ++k) rank[perm[k]] = k + 1;
    return rank;
}

}  // namespace bdlab
