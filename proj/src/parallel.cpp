#include "qsep/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace qsep {

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("QSEP_THREADS")) {
        const std::string_view s(env);
        unsigned v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc{} && ptr == s.data() + s.size() && v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace qsep
