#include "reflect/io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "reflect/errors.hpp"
#include "reflect/text.hpp"

namespace reflect::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("rename to " + path.string() + " failed: " + ec.message());
    }
}

std::vector<json> parse_jsonl(std::string_view contents) {
    std::vector<json> rows;
    std::size_t line_no = 0;
    for (auto line : text::split_lines(contents)) {
        ++line_no;
        line = text::trim(line);
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
    }
    return rows;
}

std::vector<json> read_jsonl(const fs::path& path) { return parse_jsonl(read_file(path)); }

std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& row : rows) {
        out += row.dump();
        out += '\n';
    }
    return out;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) { write_file_atomic(path, to_jsonl(rows)); }

void append_jsonl(const fs::path& path, const json& row) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to " + path.string());
    out << row.dump() << '\n';
    out.flush();
    if (!out) throw Error("append failed for " + path.string());
}

}  // namespace reflect::io
