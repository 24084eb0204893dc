#pragma once

// Line-record files: one flat JSON object per line. Lines starting with '#'
// carry provenance metadata (`# key=value ...`) and are skipped by loaders.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctrlgen/errors.hpp"

namespace ctrlgen {

using Json = nlohmann::json;
using Metadata = std::map<std::string, std::string>;

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// Builds a JSON object line with fields in insertion order and numbers in a
// fixed textual form, so files are byte-stable.
class RecordWriter {
public:
    RecordWriter& field(const std::string& key, const std::string& value) {
        sep();
        line_ += Json(key).dump() + ":" + Json(value).dump();
        return *this;
    }

    RecordWriter& field(const std::string& key, const char* value) { return field(key, std::string(value)); }

    RecordWriter& field(const std::string& key, long long value) {
        sep();
        line_ += Json(key).dump() + ":" + std::to_string(value);
        return *this;
    }

    RecordWriter& number(const std::string& key, double value) {
        sep();
        line_ += Json(key).dump() + ":" + fixed6(value);
        return *this;
    }

    RecordWriter& null(const std::string& key) {
        sep();
        line_ += Json(key).dump() + ":null";
        return *this;
    }

    std::string str() const { return line_ + "}"; }

private:
    void sep() { line_ += line_.size() > 1 ? "," : ""; }
    std::string line_ = "{";
};

inline std::string metadata_line(const Metadata& meta) {
    std::string s = "#";
    for (const auto& [k, v] : meta) s += " " + k + "=" + v;
    return s;
}

inline void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines,
                        const Metadata& meta = {}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path.string());
    if (!meta.empty()) out << metadata_line(meta) << '\n';
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw Error("io", "failed writing " + path.string());
}

// Calls `fn(json, line_number)` for every record line; reports JSON syntax
// errors as MalformedRecordError with the 1-based line number.
inline void for_each_record(const std::filesystem::path& path,
                            const std::function<void(const Json&, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot read " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw MalformedRecordError(lineno, std::string("not a JSON object: ") + e.what());
        }
        if (!j.is_object()) throw MalformedRecordError(lineno, "not a JSON object");
        fn(j, lineno);
    }
}

inline Metadata read_metadata(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    Metadata meta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] != '#') continue;
        std::istringstream words(line.substr(1));
        std::string kv;
        while (words >> kv) {
            const auto eq = kv.find('=');
            if (eq != std::string::npos) meta[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
    }
    return meta;
}

template <class T>
T require_field(const Json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) throw MalformedRecordError(line, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw MalformedRecordError(line, std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace ctrlgen
