#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace flood {

// Line-oriented logger writing to stderr and, when attached, a run log file.
class Log {
public:
    Log() = default;

    void attach_file(const std::filesystem::path& path) {
        file_.open(path, std::ios::app);
    }

    void info(const std::string& msg) { emit("INFO", msg); }
    void warn(const std::string& msg) { emit("WARN", msg); }
    void error(const std::string& msg) { emit("ERROR", msg); }

private:
    void emit(const char* level, const std::string& msg) {
        auto now = std::chrono::system_clock::now();
        std::time_t t = std::chrono::system_clock::to_time_t(now);
        char stamp[32];
        std::tm tm_buf{};
#if defined(_WIN32)
        gmtime_s(&tm_buf, &t);
#else
        gmtime_r(&t, &tm_buf);
#endif
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_buf);
        std::string line = std::string(stamp) + " [" + level + "] " + msg;
        std::cerr << line << "\n";
        if (file_.is_open()) {
            file_ << line << "\n";
            file_.flush();
        }
    }

    std::ofstream file_;
};

}  // namespace flood
