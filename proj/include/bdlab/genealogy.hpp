#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bdlab {

// Particle identifier: a finite path of child indices from the founding
// particle. The empty path is the founding particle itself; child j of a
// particle with path p has path p.j. Paths are kept explicit (not hashed)
// so event logs stay auditable.
class Label {
  public:
    Label() = default;
    static Label root() { return Label(); }

    Label child(uint32_t index) const {
        Label c(*this);
        c.path_.push_back(index);
        return c;
    }

    const std::vector<uint32_t>& path() const { return path_; }
    bool is_root() const { return path_.empty(); }
    size_t depth() const { return path_.size(); }

    // Rendered as child indices joined by a middle dot; the founding
    // particle renders as the empty-set sign.
    std::string str() const;

    // FNV-1a over the path elements; used to key per-particle random streams.
    uint64_t hash64() const;

    friend bool operator==(const Label& a, const Label& b) { return a.path_ == b.path_; }
    friend bool operator!=(const Label& a, const Label& b) { return !(a == b); }

  private:
    std::vector<uint32_t> path_;
};

// True iff `ancestor` is a strict ancestor of `descendant` (proper path prefix).
bool is_strict_ancestor(const Label& ancestor, const Label& descendant);

// Total order among labels that can coexist in one population: compares child
// indices at the first point of divergence. Throws std::invalid_argument when
// one label is a strict ancestor of the other (such pairs never coexist, so
// the order is undefined for them). Returns -1, 0, +1.
int compare(const Label& a, const Label& b);

// Container order: plain lexicographic comparison including the prefix case.
// Coincides with compare() on any coexisting set of labels.
struct LabelLess {
    bool operator()(const Label& a, const Label& b) const {
        return a.path() < b.path();
    }
};

// No member of a valid population set is a strict ancestor of another.
bool is_antichain(std::span<const Label> labels);

// Position of each label in the sorted order, 1-based. The inverse of this
// indexing recovers the labels by sorting.
std::vector<size_t> order_indices(std::span<const Label> labels);

}  // namespace bdlab
