#include "adhops/hierarchy.hpp"

#include <algorithm>
#include <limits>

namespace adhops::hierarchy {

HierarchyIndex HierarchyIndex::from_occupations(const std::vector<int>& k) {
    HierarchyIndex out;
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (k[j] < 0) throw std::invalid_argument("hierarchy index: negative occupation");
        for (int c = 0; c < k[j]; ++c) out = out.raised(static_cast<std::uint32_t>(j));
    }
    return out;
}

int HierarchyIndex::count(std::uint32_t mode) const {
    int c = 0;
    for (std::size_t i = 0; i < depth_; ++i) c += labels_[i] == mode;
    return c;
}

std::vector<int> HierarchyIndex::occupations(std::size_t n_modes) const {
    std::vector<int> k(n_modes, 0);
    for (std::size_t i = 0; i < depth_; ++i) {
        if (labels_[i] >= n_modes) throw std::out_of_range("hierarchy index: mode label out of range");
        ++k[labels_[i]];
    }
    return k;
}

HierarchyIndex HierarchyIndex::raised(std::uint32_t mode) const {
    if (depth_ >= kMaxDepth) throw std::length_error("hierarchy index: depth exceeds " + std::to_string(kMaxDepth));
    HierarchyIndex out = *this;
    std::size_t pos = depth_;
    while (pos > 0 && out.labels_[pos - 1] > mode) {
        out.labels_[pos] = out.labels_[pos - 1];
        --pos;
    }
    out.labels_[pos] = mode;
    ++out.depth_;
    return out;
}

HierarchyIndex HierarchyIndex::lowered(std::uint32_t mode) const {
    HierarchyIndex out = *this;
    std::size_t pos = 0;
    while (pos < depth_ && labels_[pos] != mode) ++pos;
    if (pos == depth_) throw std::logic_error("hierarchy index: lowering an empty mode");
    for (std::size_t i = pos; i + 1 < depth_; ++i) out.labels_[i] = out.labels_[i + 1];
    out.labels_[depth_ - 1] = 0;
    --out.depth_;
    return out;
}

std::size_t HierarchyIndex::hash() const {
    std::uint64_t h = 1469598103934665603ULL ^ depth_;
    for (std::size_t i = 0; i < depth_; ++i) {
        h ^= labels_[i];
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
}

std::string HierarchyIndex::to_string() const {
    std::string s = "{";
    bool first = true;
    for_each_mode([&](std::uint32_t m, int c) {
        if (!first) s += ",";
        first = false;
        s += std::to_string(m) + ":" + std::to_string(c);
    });
    return s + "}";
}

bool operator<(const HierarchyIndex& a, const HierarchyIndex& b) {
    if (a.depth_ != b.depth_) return a.depth_ < b.depth_;
    for (std::size_t i = 0; i < a.depth_; ++i) {
        if (a.labels_[i] != b.labels_[i]) return a.labels_[i] < b.labels_[i];
    }
    return false;
}

IndexRegistry::IndexRegistry() { intern(HierarchyIndex{}); }

std::uint32_t IndexRegistry::intern(const HierarchyIndex& k) {
    const auto it = id_of_.find(k);
    if (it != id_of_.end()) return it->second;
    std::vector<Lower> lowers;
    k.for_each_mode([&](std::uint32_t j, int c) { lowers.push_back({j, c, intern(k.lowered(j))}); });
    const auto id = static_cast<std::uint32_t>(index_.size());
    index_.push_back(k);
    id_of_.emplace(k, id);
    lower_.push_back(std::move(lowers));
    raise_.emplace_back();
    return id;
}

std::int64_t IndexRegistry::find(const HierarchyIndex& k) const {
    const auto it = id_of_.find(k);
    return it == id_of_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::uint32_t IndexRegistry::raised(std::uint32_t id, std::uint32_t mode) {
    for (const auto& [m, r] : raise_[id]) {
        if (m == mode) return r;
    }
    const std::uint32_t r = intern(index_[id].raised(mode));
    raise_[id].emplace_back(mode, r);
    return r;
}

std::int64_t HierarchySpace::find(const HierarchyIndex& k) const {
    const auto it = position.find(k);
    return it == position.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::size_t triangular_size(std::size_t n_modes, int k_max) {
    if (k_max < 0) return 0;
    // C(k + M, M) built as prod_{i=1..k} (M + i) / i, exact at every step.
    const auto k = static_cast<std::size_t>(k_max);
    unsigned __int128 c = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * (n_modes + i) / i;
        if (c > std::numeric_limits<std::size_t>::max()) return std::numeric_limits<std::size_t>::max();
    }
    return static_cast<std::size_t>(c);
}

HierarchySpace build_hierarchy(std::size_t n_modes, int k_max, std::size_t max_size) {
    if (k_max < 0) throw std::invalid_argument("hierarchy: k_max must be >= 0");
    if (static_cast<std::size_t>(k_max) > kMaxDepth) {
        throw std::invalid_argument("hierarchy: k_max exceeds supported depth " + std::to_string(kMaxDepth));
    }
    const std::size_t expected = triangular_size(n_modes, k_max);
    if (expected > max_size) {
        throw std::length_error("hierarchy: triangular space with " + std::to_string(n_modes) + " modes and k_max=" +
                                 std::to_string(k_max) + " has " + std::to_string(expected) +
                                 " auxiliaries, above the limit of " + std::to_string(max_size));
    }
    HierarchySpace space;
    space.n_modes = n_modes;
    space.k_max = k_max;
    space.indices.reserve(expected);
    space.indices.emplace_back();
    // Depth-by-depth: extend each index of depth d by a label >= its last one,
    // which enumerates every multiset exactly once.
    std::size_t begin = 0;
    for (int d = 0; d < k_max && n_modes > 0; ++d) {
        const std::size_t end = space.indices.size();
        for (std::size_t i = begin; i < end; ++i) {
            const HierarchyIndex k = space.indices[i];
            const std::uint32_t first = k.depth() == 0 ? 0 : k.label(k.depth() - 1);
            for (std::uint32_t j = first; j < n_modes; ++j) space.indices.push_back(k.raised(j));
        }
        begin = end;
    }
    space.position.reserve(space.indices.size());
    for (std::size_t i = 0; i < space.indices.size(); ++i) space.position.emplace(space.indices[i], i);

    space.raise.assign(space.indices.size() * n_modes, -1);
    space.lower.assign(space.indices.size() * n_modes, -1);
    for (std::size_t i = 0; i < space.indices.size(); ++i) {
        const auto& k = space.indices[i];
        for (std::uint32_t j = 0; j < n_modes; ++j) {
            if (static_cast<int>(k.depth()) < k_max) space.raise[i * n_modes + j] = space.find(k.raised(j));
            if (k.count(j) > 0) space.lower[i * n_modes + j] = space.find(k.lowered(j));
        }
    }
    return space;
}

HierarchySpace build_hierarchy_uniform(std::size_t modes_per_pigment, std::size_t n_pigments, int k_max,
                               std::size_t max_size) {
    return build_hierarchy(modes_per_pigment * n_pigments, k_max, max_size);
}

}  // namespace adhops::hierarchy
