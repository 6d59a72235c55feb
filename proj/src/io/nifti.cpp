#include "stroke/io/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "stroke/core/error.hpp"
#include "stroke/io/atomic_file.hpp"

namespace stroke::io {
namespace {

// On-disk NIfTI-1 header, 348 bytes, little-endian.
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kDtUint8: return 1;
    case kDtInt16: return 2;
    case kDtInt32: return 4;
    case kDtFloat32: return 4;
    default: return 0;
  }
}

class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
      fail(ErrorKind::Data, "file does not exist: " + path.string());
    f_ = gzopen(path.c_str(), "rb");
    if (!f_) fail(ErrorKind::Data, "cannot open " + path.string());
    path_ = path.string();
  }
  ~GzReader() {
    if (f_) gzclose(f_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read_exact(void* dst, std::size_t nbytes) {
    std::size_t done = 0;
    auto* p = static_cast<unsigned char*>(dst);
    while (done < nbytes) {
      const unsigned chunk =
          static_cast<unsigned>(std::min<std::size_t>(nbytes - done, 1u << 30));
      const int got = gzread(f_, p + done, chunk);
      if (got <= 0) fail(ErrorKind::Format, "truncated NIfTI file: " + path_);
      done += static_cast<std::size_t>(got);
    }
  }

  void skip(std::size_t nbytes) {
    std::vector<unsigned char> sink(std::min<std::size_t>(nbytes, 1 << 16));
    std::size_t left = nbytes;
    while (left > 0) {
      const std::size_t chunk = std::min(left, sink.size());
      read_exact(sink.data(), chunk);
      left -= chunk;
    }
  }

 private:
  gzFile f_ = nullptr;
  std::string path_;
};

Nifti1Header read_and_check_header(GzReader& in, const std::filesystem::path& path) {
  Nifti1Header hdr;
  in.read_exact(&hdr, sizeof(hdr));

  if (hdr.sizeof_hdr != 348) {
    std::int32_t swapped = hdr.sizeof_hdr;
    auto* b = reinterpret_cast<unsigned char*>(&swapped);
    std::swap(b[0], b[3]);
    std::swap(b[1], b[2]);
    if (swapped == 348)
      fail(ErrorKind::Unsupported, "big-endian NIfTI is not supported: " + path.string());
    fail(ErrorKind::Format, "not a NIfTI-1 file (sizeof_hdr != 348): " + path.string());
  }
  if (std::memcmp(hdr.magic, "ni1", 4) == 0)
    fail(ErrorKind::Format,
         "two-file NIfTI (magic \"ni1\") is not supported; convert to single-file \"n+1\": " +
             path.string());
  if (std::memcmp(hdr.magic, "n+1", 4) != 0)
    fail(ErrorKind::Format, "bad NIfTI magic (expected \"n+1\"): " + path.string());
  if (hdr.dim[0] != 3)
    fail(ErrorKind::Unsupported, "expected a 3-D NIfTI volume, got dim[0]=" +
                                     std::to_string(hdr.dim[0]) + ": " + path.string());
  for (int a = 1; a <= 3; ++a) {
    if (hdr.dim[a] < 1)
      fail(ErrorKind::Format, "non-positive extent in NIfTI header: " + path.string());
    if (!(hdr.pixdim[a] > 0.f) || !std::isfinite(hdr.pixdim[a]))
      fail(ErrorKind::Format, "non-positive pixdim in NIfTI header: " + path.string());
  }
  if (bytes_per_voxel(hdr.datatype) == 0)
    fail(ErrorKind::Unsupported, "unsupported NIfTI datatype code " +
                                     std::to_string(hdr.datatype) + ": " + path.string());
  if (hdr.vox_offset < 348.f)
    fail(ErrorKind::Format, "invalid vox_offset in NIfTI header: " + path.string());
  return hdr;
}

NiftiMeta extract_meta(const Nifti1Header& hdr) {
  NiftiMeta m;
  m.qform_code = hdr.qform_code;
  m.sform_code = hdr.sform_code;
  m.quatern_b = hdr.quatern_b;
  m.quatern_c = hdr.quatern_c;
  m.quatern_d = hdr.quatern_d;
  m.qoffset_x = hdr.qoffset_x;
  m.qoffset_y = hdr.qoffset_y;
  m.qoffset_z = hdr.qoffset_z;
  std::memcpy(m.srow_x.data(), hdr.srow_x, sizeof(hdr.srow_x));
  std::memcpy(m.srow_y.data(), hdr.srow_y, sizeof(hdr.srow_y));
  std::memcpy(m.srow_z.data(), hdr.srow_z, sizeof(hdr.srow_z));
  m.descrip.assign(hdr.descrip, strnlen(hdr.descrip, sizeof(hdr.descrip)));
  return m;
}

// Raw voxels in on-disk order (slice index fastest).
std::vector<double> read_raw(GzReader& in, const Nifti1Header& hdr) {
  const std::size_t n = static_cast<std::size_t>(hdr.dim[1]) * hdr.dim[2] * hdr.dim[3];
  const int bpv = bytes_per_voxel(hdr.datatype);
  in.skip(static_cast<std::size_t>(hdr.vox_offset) - sizeof(Nifti1Header));
  std::vector<unsigned char> buf(n * bpv);
  in.read_exact(buf.data(), buf.size());

  std::vector<double> out(n);
  switch (hdr.datatype) {
    case kDtUint8:
      for (std::size_t i = 0; i < n; ++i) out[i] = buf[i];
      break;
    case kDtInt16: {
      const auto* p = reinterpret_cast<const std::int16_t*>(buf.data());
      for (std::size_t i = 0; i < n; ++i) out[i] = p[i];
      break;
    }
    case kDtInt32: {
      const auto* p = reinterpret_cast<const std::int32_t*>(buf.data());
      for (std::size_t i = 0; i < n; ++i) out[i] = p[i];
      break;
    }
    case kDtFloat32: {
      const auto* p = reinterpret_cast<const float*>(buf.data());
      for (std::size_t i = 0; i < n; ++i) out[i] = p[i];
      break;
    }
  }
  return out;
}

bool has_gz_suffix(const std::filesystem::path& path) {
  return path.extension() == ".gz";
}

Nifti1Header make_header(int slices, int rows, int cols, const Spacing& spacing,
                         std::int16_t datatype, const NiftiMeta* meta) {
  Nifti1Header hdr{};
  hdr.sizeof_hdr = 348;
  hdr.regular = 'r';
  hdr.dim[0] = 3;
  hdr.dim[1] = static_cast<std::int16_t>(slices);
  hdr.dim[2] = static_cast<std::int16_t>(rows);
  hdr.dim[3] = static_cast<std::int16_t>(cols);
  for (int a = 4; a < 8; ++a) hdr.dim[a] = 1;
  hdr.datatype = datatype;
  hdr.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(datatype));
  hdr.pixdim[0] = 1.f;
  hdr.pixdim[1] = static_cast<float>(spacing.dz);
  hdr.pixdim[2] = static_cast<float>(spacing.dx);
  hdr.pixdim[3] = static_cast<float>(spacing.dy);
  hdr.vox_offset = 352.f;
  hdr.scl_slope = 1.f;
  hdr.scl_inter = 0.f;
  hdr.xyzt_units = 2;  // millimeters
  if (meta) {
    hdr.qform_code = meta->qform_code;
    hdr.sform_code = meta->sform_code;
    hdr.quatern_b = meta->quatern_b;
    hdr.quatern_c = meta->quatern_c;
    hdr.quatern_d = meta->quatern_d;
    hdr.qoffset_x = meta->qoffset_x;
    hdr.qoffset_y = meta->qoffset_y;
    hdr.qoffset_z = meta->qoffset_z;
    std::memcpy(hdr.srow_x, meta->srow_x.data(), sizeof(hdr.srow_x));
    std::memcpy(hdr.srow_y, meta->srow_y.data(), sizeof(hdr.srow_y));
    std::memcpy(hdr.srow_z, meta->srow_z.data(), sizeof(hdr.srow_z));
    std::memcpy(hdr.descrip, meta->descrip.c_str(),
                std::min(meta->descrip.size(), sizeof(hdr.descrip) - 1));
  }
  std::memcpy(hdr.magic, "n+1", 4);
  return hdr;
}

void write_bytes(const std::filesystem::path& path, const Nifti1Header& hdr,
                 const void* data, std::size_t nbytes) {
  std::string blob;
  blob.resize(sizeof(hdr) + 4 + nbytes);
  std::memcpy(blob.data(), &hdr, sizeof(hdr));
  std::memset(blob.data() + sizeof(hdr), 0, 4);  // no header extensions
  std::memcpy(blob.data() + sizeof(hdr) + 4, data, nbytes);

  if (has_gz_suffix(path)) {
    atomic_write(path, [&](const std::filesystem::path& tmp) {
      gzFile f = gzopen(tmp.c_str(), "wb9");
      if (!f) fail(ErrorKind::Runtime, "cannot open for writing: " + tmp.string());
      std::size_t done = 0;
      while (done < blob.size()) {
        const unsigned chunk =
            static_cast<unsigned>(std::min<std::size_t>(blob.size() - done, 1u << 30));
        if (gzwrite(f, blob.data() + done, chunk) != static_cast<int>(chunk)) {
          gzclose(f);
          fail(ErrorKind::Runtime, "short write: " + tmp.string());
        }
        done += chunk;
      }
      gzclose(f);
    });
  } else {
    atomic_write_bytes(path, blob.data(), blob.size());
  }
}

}  // namespace

VolumeFile read_volume_file(const std::filesystem::path& path, const std::string& case_id) {
  GzReader in(path);
  const Nifti1Header hdr = read_and_check_header(in, path);
  const std::vector<double> raw = read_raw(in, hdr);

  const int ns = hdr.dim[1], nr = hdr.dim[2], nc = hdr.dim[3];
  const bool rescale = hdr.scl_slope != 0.f && !(hdr.scl_slope == 1.f && hdr.scl_inter == 0.f);

  VolumeFile out;
  out.volume.case_id = case_id.empty() ? path.stem().stem().string() : case_id;
  out.volume.spacing = {hdr.pixdim[1], hdr.pixdim[2], hdr.pixdim[3]};
  out.volume.data = VoxelGrid(ns, nr, nc);
  std::size_t i = 0;
  for (int c = 0; c < nc; ++c)
    for (int r = 0; r < nr; ++r)
      for (int s = 0; s < ns; ++s) {
        double v = raw[i++];
        if (rescale) v = v * hdr.scl_slope + hdr.scl_inter;
        if (!std::isfinite(v))
          fail(ErrorKind::Data, "non-finite voxel in " + path.string());
        out.volume.data(s, r, c) = static_cast<float>(v);
      }
  out.meta = extract_meta(hdr);
  return out;
}

Volume read_volume(const std::filesystem::path& path, const std::string& case_id) {
  return read_volume_file(path, case_id).volume;
}

void write_volume(const Volume& volume, const std::filesystem::path& path, const NiftiMeta* meta) {
  volume.spacing.validate();
  const int ns = volume.slices(), nr = volume.rows(), nc = volume.cols();
  const Nifti1Header hdr = make_header(ns, nr, nc, volume.spacing, kDtFloat32, meta);
  std::vector<float> disk(static_cast<std::size_t>(ns) * nr * nc);
  std::size_t i = 0;
  for (int c = 0; c < nc; ++c)
    for (int r = 0; r < nr; ++r)
      for (int s = 0; s < ns; ++s) disk[i++] = volume.data(s, r, c);
  write_bytes(path, hdr, disk.data(), disk.size() * sizeof(float));
}

MaskFile read_mask_file(const std::filesystem::path& path, const LabelSchema& schema) {
  schema.validate();
  GzReader in(path);
  const Nifti1Header hdr = read_and_check_header(in, path);
  if (hdr.datatype == kDtFloat32)
    fail(ErrorKind::Format, "mask files must use an integer datatype: " + path.string());
  if (hdr.scl_slope != 0.f && !(hdr.scl_slope == 1.f && hdr.scl_inter == 0.f))
    fail(ErrorKind::Format, "mask files must not carry intensity scaling: " + path.string());

  const std::vector<double> raw = read_raw(in, hdr);
  const int ns = hdr.dim[1], nr = hdr.dim[2], nc = hdr.dim[3];

  MaskFile out;
  out.mask.schema = schema;
  out.mask.data = LabelGrid(ns, nr, nc);
  std::size_t i = 0;
  for (int c = 0; c < nc; ++c)
    for (int r = 0; r < nr; ++r)
      for (int s = 0; s < ns; ++s) {
        const double v = raw[i++];
        const int id = static_cast<int>(v);
        if (id < 0 || id > 255 || !schema.has(id))
          fail(ErrorKind::Schema, "mask value " + std::to_string(id) +
                                      " is not in the label schema: " + path.string());
        out.mask.data(s, r, c) = static_cast<std::uint8_t>(id);
      }
  out.meta = extract_meta(hdr);
  return out;
}

LabelMask read_mask(const std::filesystem::path& path, const LabelSchema& schema) {
  return read_mask_file(path, schema).mask;
}

void write_mask(const LabelMask& mask, const std::filesystem::path& path, const Spacing& spacing,
                const NiftiMeta* meta) {
  if (mask.schema.max_id() > 255)
    fail(ErrorKind::Unsupported, "label ids above 255 are not supported");
  const int ns = mask.slices(), nr = mask.rows(), nc = mask.cols();
  Nifti1Header hdr = make_header(ns, nr, nc, spacing, kDtUint8, meta);
  std::vector<std::uint8_t> disk(static_cast<std::size_t>(ns) * nr * nc);
  std::size_t i = 0;
  for (int c = 0; c < nc; ++c)
    for (int r = 0; r < nr; ++r)
      for (int s = 0; s < ns; ++s) disk[i++] = mask.data(s, r, c);
  write_bytes(path, hdr, disk.data(), disk.size());
}

Spacing read_spacing(const std::filesystem::path& path) {
  GzReader in(path);
  const Nifti1Header hdr = read_and_check_header(in, path);
  return {hdr.pixdim[1], hdr.pixdim[2], hdr.pixdim[3]};
}

}  // namespace stroke::io
