// SPDX-License-Identifier: Apache-2.0

#include "ifl/util.hpp"

#include <atomic>

namespace ifl {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) {
    if (n < 1) throw InvalidParameter("thread count must be >= 1");
    g_threads.store(n);
}

int get_threads() { return g_threads.load(); }

void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn) {
    const int t = get_threads();
    if (t == 1 || n < 2 * size_t(t)) {
        fn(0, n);
        return;
    }
    const size_t chunk = (n + t - 1) / t;
    std::vector<std::thread> workers;
    workers.reserve(size_t(t));
    for (int i = 0; i < t; ++i) {
        const size_t begin = std::min(n, size_t(i) * chunk);
        const size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back(fn, begin, end);
    }
    for (auto& w : workers) w.join();
}

double parallel_sum(size_t n, const std::function<double(size_t)>& fn) {
    const int t = get_threads();
    if (t == 1 || n < 2 * size_t(t)) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) sum += fn(i);
        return sum;
    }
    const size_t chunk = (n + t - 1) / t;
    std::vector<double> partial(size_t(t), 0.0);
    std::vector<std::thread> workers;
    workers.reserve(size_t(t));
    for (int i = 0; i < t; ++i) {
        const size_t begin = std::min(n, size_t(i) * chunk);
        const size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&fn, &partial, i, begin, end] {
            double s = 0.0;
            for (size_t k = begin; k < end; ++k) s += fn(k);
            partial[size_t(i)] = s;
        });
    }
    for (auto& w : workers) w.join();
    // combine in chunk order: same thread count => same bits
    double sum = 0.0;
    for (double s : partial) sum += s;
    return sum;
}

std::string fnv1a_hex(std::string_view bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ifl
