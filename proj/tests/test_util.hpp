#pragma once

// Shared helpers for the test binaries: scratch directories, file IO, process
// invocation, and randomised model construction.

#include "canids/cqmlp.hpp"
#include "canids/rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create temp directory for " + tag);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

  private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// Runs a command line, captures stdout+stderr into `output`, returns the exit
// status (-1 if the process did not exit normally).
inline int run_cmd(const std::string& cmd, std::string& output, const std::string& log_path) {
    const std::string full = cmd + " > " + log_path + " 2>&1";
    int rc = std::system(full.c_str());
    output = slurp(log_path);
    if (rc == -1) return -1;
    if (WIFEXITED(rc)) return WEXITSTATUS(rc);
    return -1;
}

// Model with randomised parameters, batch-norm statistics, and activation
// scales. Gammas get random signs so folded slopes of both signs occur.
inline canids::CqmlpModel make_random_model(std::span<const int> dims, int bits, canids::Rng& rng) {
    canids::CqmlpModel m = canids::make_model(dims, bits);
    canids::init_params(m, rng);
    for (auto& lin : m.linear)
        for (auto& b : lin.b) b = rng.uniform(-0.5, 0.5);
    for (auto& bn : m.bn) {
        for (auto& g : bn.gamma) g = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
        for (auto& b : bn.beta) b = rng.uniform(-1.0, 1.0);
        for (auto& mu : bn.running_mean) mu = rng.uniform(-1.0, 1.0);
        for (auto& v : bn.running_var) v = rng.uniform(0.25, 4.0);
    }
    for (auto& s : m.act_scale) s = rng.uniform(0.02, 1.0);
    return m;
}

}  // namespace testutil
