#include "abkb/fileio.hpp"

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "abkb/errors.hpp"

namespace abkb {

namespace {

std::string os_error(const std::string& what, const std::string& path) {
    return what + " '" + path + "': " + std::strerror(errno);
}

void write_all(int fd, std::string_view content, const std::string& path) {
    const char* p = content.data();
    std::size_t left = content.size();
    while (left > 0) {
        const ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(os_error("cannot write", path));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

}  // namespace

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_atomic(const std::string& path, std::string_view content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(os_error("cannot create", tmp));
    try {
        write_all(fd, content, tmp);
        if (::fsync(fd) != 0) throw Error(os_error("cannot sync", tmp));
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        ::unlink(tmp.c_str());
        throw Error(os_error("cannot rename onto", path));
    }
}

void append_durable(const std::string& path, std::string_view content) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(os_error("cannot open", path));
    try {
        write_all(fd, content, path);
        if (::fdatasync(fd) != 0) throw Error(os_error("cannot sync", path));
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

std::string json_document(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

}  // namespace abkb
