#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace adhops::detail {
namespace {

struct PlanCache {
    std::mutex mutex;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans;

    ~PlanCache() {
        for (auto& [key, plan] : plans) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard lock(mutex);
        auto it = plans.find({n, sign});
        if (it != plans.end()) return it->second;
        // In-place plan on a scratch buffer so callers' data is never touched by
        // the planner. FFTW_UNALIGNED lets it run on any std::vector storage.
        auto* buf = fftw_alloc_complex(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        if (p == nullptr) throw std::runtime_error("fftw: planning failed");
        plans.emplace(std::make_pair(n, sign), p);
        return p;
    }
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& data, FftDirection dir) {
    if (data.empty()) return;
    const int sign = dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan plan = cache().get(data.size(), sign);
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
}

std::size_t good_fft_size(std::size_t n) {
    if (n <= 1) return 1;
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t f : {2u, 3u, 5u}) {
            while (r % f == 0) r /= f;
        }
        if (r == 1) return m;
    }
}

}  // namespace adhops::detail
