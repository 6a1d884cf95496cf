#include <atomic>
#include <iostream>
#include <mutex>

#include "ctface/error.hpp"

namespace ctface {

namespace {
std::mutex log_mutex;
std::atomic<bool> verbose_flag{false};
}  // namespace

void set_verbose(bool verbose) { verbose_flag = verbose; }

void log_warning(const std::string& message) {
    std::lock_guard lock(log_mutex);
    std::cerr << "[warn] " << message << '\n';
}

void log_info(const std::string& message) {
    if (!verbose_flag) return;
    std::lock_guard lock(log_mutex);
    std::cerr << "[info] " << message << '\n';
}

}  // namespace ctface
