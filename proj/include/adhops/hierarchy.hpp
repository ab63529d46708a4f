#pragma once

// Hierarchy multi-indices stored as sorted multisets of mode labels: the
// vector k = e_3 + 2 e_5 is kept as {3, 5, 5}. This keeps every index the
// same fixed size regardless of how many modes the system has.

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace adhops::hierarchy {

inline constexpr std::size_t kMaxDepth = 24;

class HierarchyIndex {
public:
    HierarchyIndex() = default;
    // From a dense occupation vector.
    static HierarchyIndex from_occupations(const std::vector<int>& k);

    std::size_t depth() const { return depth_; }
    std::uint32_t label(std::size_t i) const { return labels_[i]; }
    int count(std::uint32_t mode) const;
    std::vector<int> occupations(std::size_t n_modes) const;

    // k + e_mode. Throws std::length_error beyond kMaxDepth.
    HierarchyIndex raised(std::uint32_t mode) const;
    // k - e_mode; requires count(mode) > 0.
    HierarchyIndex lowered(std::uint32_t mode) const;

    // Distinct modes with their counts, ascending by mode.
    template <class Fn>
    void for_each_mode(Fn&& fn) const {
        std::size_t i = 0;
        while (i < depth_) {
            std::size_t j = i + 1;
            while (j < depth_ && labels_[j] == labels_[i]) ++j;
            fn(labels_[i], static_cast<int>(j - i));
            i = j;
        }
    }

    std::size_t hash() const;
    std::string to_string() const;

    friend bool operator==(const HierarchyIndex& a, const HierarchyIndex& b) {
        if (a.depth_ != b.depth_) return false;
        for (std::size_t i = 0; i < a.depth_; ++i) {
            if (a.labels_[i] != b.labels_[i]) return false;
        }
        return true;
    }
    // Depth first, then lexicographic on labels.
    friend bool operator<(const HierarchyIndex& a, const HierarchyIndex& b);

private:
    std::array<std::uint32_t, kMaxDepth> labels_{};
    std::uint8_t depth_ = 0;
};

struct IndexHash {
    std::size_t operator()(const HierarchyIndex& k) const { return k.hash(); }
};

struct HierarchySpace {
    std::size_t n_modes = 0;
    int k_max = 0;
    std::vector<HierarchyIndex> indices;              // depth-ordered, indices[0] is 0
    std::unordered_map<HierarchyIndex, std::size_t, IndexHash> position;
    // raise[i * n_modes + j] / lower[...]: position of k_i +- e_j or -1.
    std::vector<std::int64_t> raise;
    std::vector<std::int64_t> lower;

    std::size_t size() const { return indices.size(); }
    std::int64_t find(const HierarchyIndex& k) const;
};

// Interns indices as dense integer ids and caches their neighbours, so code
// that rebuilds bases often (the adaptive controller) works on integers.
// Every lowered neighbour of an interned index is interned with it.
class IndexRegistry {
public:
    struct Lower {
        std::uint32_t mode;
        std::int32_t count;  // occupation of `mode` in the index itself
        std::uint32_t id;    // id of k - e_mode
    };

    IndexRegistry();  // id 0 is the zero index

    std::uint32_t intern(const HierarchyIndex& k);
    // -1 when k has never been interned.
    std::int64_t find(const HierarchyIndex& k) const;
    // Id of index(id) + e_mode, interning it on first use.
    std::uint32_t raised(std::uint32_t id, std::uint32_t mode);

    const HierarchyIndex& index(std::uint32_t id) const { return index_[id]; }
    const std::vector<Lower>& lowers(std::uint32_t id) const { return lower_[id]; }
    std::size_t size() const { return index_.size(); }

private:
    std::vector<HierarchyIndex> index_;
    std::unordered_map<HierarchyIndex, std::uint32_t, IndexHash> id_of_;
    std::vector<std::vector<Lower>> lower_;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> raise_;  // (mode, id)
};

// C(k_max + M, M), saturating at SIZE_MAX.
std::size_t triangular_size(std::size_t n_modes, int k_max);

// Full triangular truncation. Throws std::length_error when the space would
// hold more than max_size indices.
HierarchySpace build_hierarchy(std::size_t n_modes, int k_max, std::size_t max_size = 5'000'000);

// Convenience for uniform baths: n_pigments * modes_per_pigment modes.
HierarchySpace build_hierarchy_uniform(std::size_t modes_per_pigment, std::size_t n_pigments, int k_max,
                               std::size_t max_size = 5'000'000);

}  // namespace adhops::hierarchy
