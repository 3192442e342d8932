#ifndef MTIR_OCCS_IO_HPP
#define MTIR_OCCS_IO_HPP

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtir/sample.hpp"

// OCCS sample file, little-endian:
//   "OCCS" | u32 version=1 | u32 N | u32 class_label
//   N x 3 f32 query points | N u8 occupancy | N u16 part labels
//   300 x 3 f32 input cloud

namespace mtir {

constexpr uint32_t kOccsVersion = 1;

namespace detail {

struct File {
  std::FILE* f;
  explicit File(std::FILE* f) : f(f) {}
  ~File() {
    if (f) std::fclose(f);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

inline void io_fail(const std::string& path, const char* what) {
  throw std::runtime_error(path + ": " + what);
}

}  // namespace detail

inline void write_occs(const std::string& path, const SampleBatch& batch) {
  detail::File out(std::fopen(path.c_str(), "wb"));
  if (!out.f) detail::io_fail(path, "cannot open for writing");
  auto put = [&](const void* p, size_t n) {
    if (std::fwrite(p, 1, n, out.f) != n) detail::io_fail(path, "short write");
  };
  uint32_t n = uint32_t(batch.query_points.size());
  put("OCCS", 4);
  put(&kOccsVersion, 4);
  put(&n, 4);
  put(&batch.class_label, 4);
  put(batch.query_points.data(), size_t(n) * 12);
  put(batch.gt_occupancy.data(), n);
  put(batch.gt_part_label.data(), size_t(n) * 2);
  if (batch.input_cloud.size() != kCloudSize)
    detail::io_fail(path, "input cloud must hold 300 points");
  put(batch.input_cloud.data(), size_t(kCloudSize) * 12);
}

inline SampleBatch read_occs(const std::string& path) {
  detail::File in(std::fopen(path.c_str(), "rb"));
  if (!in.f) detail::io_fail(path, "cannot open");
  auto get = [&](void* p, size_t n) {
    if (std::fread(p, 1, n, in.f) != n) detail::io_fail(path, "truncated");
  };
  char magic[4];
  uint32_t version, n;
  SampleBatch batch;
  get(magic, 4);
  if (std::memcmp(magic, "OCCS", 4) != 0) detail::io_fail(path, "bad magic");
  get(&version, 4);
  if (version != kOccsVersion) detail::io_fail(path, "unsupported version");
  get(&n, 4);
  if (n == 0 || n > (1u << 24)) detail::io_fail(path, "implausible count");
  get(&batch.class_label, 4);
  batch.query_points.resize(n);
  batch.gt_occupancy.resize(n);
  batch.gt_part_label.resize(n);
  batch.input_cloud.resize(kCloudSize);
  get(batch.query_points.data(), size_t(n) * 12);
  get(batch.gt_occupancy.data(), n);
  get(batch.gt_part_label.data(), size_t(n) * 2);
  get(batch.input_cloud.data(), size_t(kCloudSize) * 12);
  char extra;
  if (std::fread(&extra, 1, 1, in.f) == 1)
    detail::io_fail(path, "trailing bytes");
  return batch;
}

}  // namespace mtir

#endif
