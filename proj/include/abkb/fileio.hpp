#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace abkb {

/// Whole file as bytes. Throws InvalidArgument when it cannot be read.
std::string read_text(const std::string& path);
nlohmann::json read_json(const std::string& path);

/// Writes to a sibling temporary file, flushes it to disk and renames it
/// over `path`, so readers see either the old or the new content.
void write_atomic(const std::string& path, std::string_view content);

/// Appends bytes and fsyncs before returning. Throws Error on failure.
void append_durable(const std::string& path, std::string_view content);

/// Canonical on-disk form of every JSON artifact (2-space indent, newline).
std::string json_document(const nlohmann::json& doc);

}  // namespace abkb
