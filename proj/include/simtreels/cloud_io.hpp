#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/errors.hpp"

namespace simtreels {

// Cloud files come in two flavours:
//   CSV  - header `x,y,z,tree_id,level,scanline_id,pose_index`, LF line
//          endings, '.' decimal point, full double precision (shortest
//          round-trip form). Source clouds leave the last two columns empty.
//   PLY  - binary little-endian, x/y/z as float32 (documented precision
//          loss), tree_id uint32, level uchar, plus scanline_id/pose_index
//          uint32 for scan outputs. Provenance is carried in a header
//          comment.
// Extension picks the format in read_cloud()/write_cloud().

namespace io_detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void append_uint(std::string& out, std::uint64_t v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& ctx) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("bad numeric field '" + std::string(s) + "' in " + ctx);
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, const std::string& ctx) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("bad integer field '" + std::string(s) + "' in " + ctx);
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const char*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace io_detail

inline constexpr const char* kCloudCsvHeader =
    "x,y,z,tree_id,level,scanline_id,pose_index";

inline std::string cloud_to_csv(const LabelledCloud& cloud) {
  using namespace io_detail;
  std::string out;
  out.reserve(64 + cloud.size() * 48);
  out += kCloudCsvHeader;
  out += '\n';
  const bool scan = cloud.has_scan_fields();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    append_double(out, cloud.positions[i].x());
    out += ',';
    append_double(out, cloud.positions[i].y());
    out += ',';
    append_double(out, cloud.positions[i].z());
    out += ',';
    append_uint(out, cloud.tree_ids[i]);
    out += ',';
    append_uint(out, cloud.levels[i]);
    out += ',';
    if (scan) {
      append_uint(out, cloud.scanline_ids[i]);
      out += ',';
      append_uint(out, cloud.pose_indices[i]);
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

inline LabelledCloud cloud_from_csv(std::string_view text,
                                    const std::string& name = "csv") {
  using namespace io_detail;
  LabelledCloud cloud;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kCloudCsvHeader)
        throw IoError(name + ": expected header '" +
                      std::string(kCloudCsvHeader) + "', got '" +
                      std::string(line) + "'");
      saw_header = true;
      continue;
    }
    const std::string ctx = name + " line " + std::to_string(line_no);
    auto fields = split_csv(line);
    if (fields.size() != 7) throw IoError(ctx + ": expected 7 fields");
    LabelledPoint p;
    p.position = {parse_double(fields[0], ctx), parse_double(fields[1], ctx),
                  parse_double(fields[2], ctx)};
    p.tree_id = static_cast<std::uint32_t>(parse_uint(fields[3], ctx));
    p.level = static_cast<std::uint8_t>(parse_uint(fields[4], ctx));
    const bool has5 = !fields[5].empty(), has6 = !fields[6].empty();
    if (has5 != has6)
      throw IoError(ctx + ": scanline_id and pose_index must both be set "
                          "or both be empty");
    if (has5) {
      p.has_scan = true;
      p.scanline_id = static_cast<std::uint32_t>(parse_uint(fields[5], ctx));
      p.pose_index = static_cast<std::uint32_t>(parse_uint(fields[6], ctx));
    }
    try {
      cloud.append(p);
    } catch (const ConfigError& e) {
      throw IoError(ctx + ": " + e.what());
    }
  }
  if (!saw_header) throw IoError(name + ": empty file, missing header");
  return cloud;
}

inline std::string cloud_to_ply(const LabelledCloud& cloud) {
  using namespace io_detail;
  const bool scan = cloud.has_scan_fields();
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n";
  header << "comment simtreels stage=" << (cloud.meta.stage.empty()
                                               ? "unknown"
                                               : cloud.meta.stage)
         << " seed=" << cloud.meta.seed << " params_hash=" << std::hex
         << cloud.meta.params_hash << std::dec << "\n";
  header << "element vertex " << cloud.size() << "\n";
  header << "property float x\nproperty float y\nproperty float z\n";
  header << "property uint tree_id\nproperty uchar level\n";
  if (scan) header << "property uint scanline_id\nproperty uint pose_index\n";
  header << "end_header\n";

  std::string out = header.str();
  const std::size_t stride = 12 + 4 + 1 + (scan ? 8 : 0);
  out.reserve(out.size() + cloud.size() * stride);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    put_le(out, static_cast<float>(cloud.positions[i].x()));
    put_le(out, static_cast<float>(cloud.positions[i].y()));
    put_le(out, static_cast<float>(cloud.positions[i].z()));
    put_le(out, cloud.tree_ids[i]);
    put_le(out, cloud.levels[i]);
    if (scan) {
      put_le(out, cloud.scanline_ids[i]);
      put_le(out, cloud.pose_indices[i]);
    }
  }
  return out;
}

inline LabelledCloud cloud_from_ply(std::string_view data,
                                    const std::string& name = "ply") {
  using namespace io_detail;
  const std::size_t header_end = data.find("end_header\n");
  if (data.substr(0, 4) != "ply\n" || header_end == std::string_view::npos)
    throw IoError(name + ": not a PLY file");
  std::string_view header = data.substr(0, header_end);

  std::size_t count = 0;
  std::vector<std::string> props;
  CloudMeta meta;
  std::size_t pos = 0;
  while (pos < header.size()) {
    std::size_t eol = header.find('\n', pos);
    if (eol == std::string_view::npos) eol = header.size();
    std::string line(header.substr(pos, eol - pos));
    pos = eol + 1;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "binary_little_endian")
        throw IoError(name + ": unsupported PLY format '" + fmt + "'");
    } else if (tok == "comment") {
      std::string word;
      while (ss >> word) {
        if (word.rfind("seed=", 0) == 0)
          meta.seed = std::strtoull(word.c_str() + 5, nullptr, 10);
        else if (word.rfind("params_hash=", 0) == 0)
          meta.params_hash = std::strtoull(word.c_str() + 12, nullptr, 16);
        else if (word.rfind("stage=", 0) == 0)
          meta.stage = word.substr(6);
      }
    } else if (tok == "element") {
      std::string what;
      ss >> what >> count;
      if (what != "vertex")
        throw IoError(name + ": unsupported PLY element '" + what + "'");
    } else if (tok == "property") {
      std::string type, pname;
      ss >> type >> pname;
      props.push_back(type + " " + pname);
    }
  }

  auto is = [](const std::string& p, const char* a, const char* b) {
    return p == std::string(a) + " " + b;
  };
  bool scan = false;
  if (props.size() == 7 &&
      (is(props[5], "uint", "scanline_id") ||
       is(props[5], "uint32", "scanline_id")))
    scan = true;
  else if (props.size() != 5)
    throw IoError(name + ": unexpected PLY property layout");
  const bool f32 = props[0] == "float x" || props[0] == "float32 x";
  if (!f32) throw IoError(name + ": expected float32 coordinates");

  const std::size_t stride = 12 + 4 + 1 + (scan ? 8 : 0);
  const char* p = data.data() + header_end + 11;
  const std::size_t avail = data.size() - (header_end + 11);
  if (avail < count * stride)
    throw IoError(name + ": truncated PLY payload");

  LabelledCloud cloud;
  cloud.meta = meta;
  cloud.reserve(count, scan);
  for (std::size_t i = 0; i < count; ++i) {
    const float x = get_le<float>(p);
    const float y = get_le<float>(p);
    const float z = get_le<float>(p);
    const std::uint32_t tree_id = get_le<std::uint32_t>(p);
    const std::uint8_t level = get_le<std::uint8_t>(p);
    if (scan) {
      const std::uint32_t sl = get_le<std::uint32_t>(p);
      const std::uint32_t pi = get_le<std::uint32_t>(p);
      cloud.append_scan({x, y, z}, tree_id, level, sl, pi);
    } else {
      cloud.append_source({x, y, z}, tree_id, level);
    }
  }
  return cloud;
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

inline void write_cloud(const std::string& path, const LabelledCloud& cloud) {
  if (ends_with(path, ".ply"))
    write_file(path, cloud_to_ply(cloud));
  else if (ends_with(path, ".csv"))
    write_file(path, cloud_to_csv(cloud));
  else
    throw IoError("unknown cloud format for '" + path +
                  "' (use .csv or .ply)");
}

inline LabelledCloud read_cloud(const std::string& path) {
  const std::string data = read_file(path);
  if (ends_with(path, ".ply")) return cloud_from_ply(data, path);
  if (ends_with(path, ".csv")) return cloud_from_csv(data, path);
  throw IoError("unknown cloud format for '" + path + "' (use .csv or .ply)");
}

}  // namespace simtreels
