// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace aofuse {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadDataset, what); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) bad("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + file.string() + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) bad("cannot open " + file.string());
  return in;
}

// Reads a netpbm-style header token, skipping whitespace and comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

int header_int(std::istream& in, const fs::path& file) {
  const std::string tok = header_token(in);
  try {
    return std::stoi(tok);
  } catch (...) {
    bad("malformed header in " + file.string());
  }
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace

json camera_to_json(const CameraModel& c) {
  return {{"f", c.f}, {"width", c.width}, {"height", c.height}, {"pixel_pitch", c.pixel_pitch}, {"cx", c.cx},
          {"cy", c.cy}};
}

CameraModel camera_from_json(const json& j) {
  try {
    CameraModel c;
    c.f = j.at("f").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.pixel_pitch = j.at("pixel_pitch").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    if (!c.is_valid()) bad("invalid camera model");
    return c;
  } catch (const json::exception& e) {
    bad(std::string("camera: ") + e.what());
  }
}

json sonar_to_json(const SonarModel& s) {
  return {{"r_min", s.r_min},
          {"r_max", s.r_max},
          {"n_range_bins", s.n_range_bins},
          {"azimuth_fov", s.azimuth_fov},
          {"n_azimuth_bins", s.n_azimuth_bins},
          {"phi_min", s.phi_min},
          {"phi_max", s.phi_max},
          {"E_e", s.E_e}};
}

SonarModel sonar_from_json(const json& j) {
  try {
    SonarModel s;
    s.r_min = j.at("r_min").get<double>();
    s.r_max = j.at("r_max").get<double>();
    s.n_range_bins = j.at("n_range_bins").get<int>();
    s.azimuth_fov = j.at("azimuth_fov").get<double>();
    s.n_azimuth_bins = j.at("n_azimuth_bins").get<int>();
    s.phi_min = j.at("phi_min").get<double>();
    s.phi_max = j.at("phi_max").get<double>();
    s.E_e = j.at("E_e").get<double>();
    if (!s.is_valid()) bad("invalid sonar model");
    return s;
  } catch (const json::exception& e) {
    bad(std::string("sonar: ") + e.what());
  }
}

json pose_to_json(const Pose& pose) {
  const auto m = pose.to_matrix();
  return json(std::vector<double>(m.begin(), m.end()));
}

Pose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 16) bad("pose must be 16 numbers (row-major 4x4)");
  std::array<double, 16> m{};
  for (std::size_t i = 0; i < 16; ++i) m[i] = j[i].get<double>();
  Pose p = Pose::from_matrix(m);
  if (!p.is_valid(1e-6)) bad("pose rotation is not orthonormal");
  return p;
}

json scene_to_json(const AnalyticScene& scene) {
  json prims = json::array();
  for (const auto& p : scene.primitives()) {
    prims.push_back({{"shape", to_string(p.shape)}, {"pose", pose_to_json(p.pose)}, {"dims", vec3_to(p.dims)}});
  }
  const auto& m = scene.material();
  return {{"primitives", prims},
          {"material",
           {{"C_dl", m.C_dl},
            {"C_sl", m.C_sl},
            {"sigma_alpha", m.sigma_alpha},
            {"optical_albedo", {m.optical_albedo[0], m.optical_albedo[1], m.optical_albedo[2]}}}}};
}

AnalyticScene scene_from_json(const json& j) {
  try {
    std::vector<Primitive> prims;
    for (const auto& pj : j.at("primitives")) {
      Primitive p;
      const auto shape = parse_shape(pj.at("shape").get<std::string>());
      if (!shape) bad("unknown shape");
      p.shape = *shape;
      p.pose = pose_from_json(pj.at("pose"));
      p.dims = vec3_from(pj.at("dims"));
      prims.push_back(p);
    }
    const auto& mj = j.at("material");
    Material m;
    m.C_dl = mj.at("C_dl").get<double>();
    m.C_sl = mj.at("C_sl").get<double>();
    m.sigma_alpha = mj.at("sigma_alpha").get<double>();
    const Vec3 a = vec3_from(mj.at("optical_albedo"));
    m.optical_albedo = {a.x(), a.y(), a.z()};
    return AnalyticScene(std::move(prims), m);
  } catch (const json::exception& e) {
    bad(std::string("scene: ") + e.what());
  }
}

json manifest_to_json(const Manifest& m) {
  json frames = json::array();
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    frames.push_back({{"index", i},
                      {"camera_pose", pose_to_json(f.camera_pose)},
                      {"sonar_pose", pose_to_json(f.sonar_pose)},
                      {"camera_image", f.camera_image},
                      {"sonar_image", f.sonar_image}});
  }
  json j = {{"format", "aofuse-dataset"},
            {"version", Manifest::kVersion},
            {"units", {{"length", "m"}, {"angle", "rad"}}},
            {"camera", camera_to_json(m.camera)},
            {"sonar", sonar_to_json(m.sonar)},
            {"trajectory", {{"baseline", m.baseline}, {"standoff", m.standoff}, {"n_poses", m.frames.size()}}},
            {"noise", {{"camera_std", m.noise.camera_std}, {"sonar_std", m.noise.sonar_std}}},
            {"seed", m.seed},
            {"roi", {{"min", vec3_to(m.roi[0])}, {"max", vec3_to(m.roi[1])}}},
            {"frames", frames}};
  if (m.scene) j["scene"] = scene_to_json(*m.scene);
  return j;
}

Manifest manifest_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "aofuse-dataset") bad("not an aofuse dataset manifest");
    if (j.at("version").get<int>() != Manifest::kVersion) bad("unsupported manifest version");
    Manifest m;
    m.camera = camera_from_json(j.at("camera"));
    m.sonar = sonar_from_json(j.at("sonar"));
    m.baseline = j.at("trajectory").at("baseline").get<double>();
    m.standoff = j.at("trajectory").at("standoff").get<double>();
    m.noise.camera_std = j.at("noise").at("camera_std").get<double>();
    m.noise.sonar_std = j.at("noise").at("sonar_std").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.roi = {vec3_from(j.at("roi").at("min")), vec3_from(j.at("roi").at("max"))};
    if (j.contains("scene")) m.scene = scene_from_json(j.at("scene"));
    for (const auto& fj : j.at("frames")) {
      m.frames.push_back({pose_from_json(fj.at("camera_pose")), pose_from_json(fj.at("sonar_pose")),
                          fj.value("camera_image", std::string()), fj.value("sonar_image", std::string())});
    }
    return m;
  } catch (const json::exception& e) {
    bad(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const Manifest& m, const fs::path& file) {
  auto out = open_out(file);
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + file.string());
}

Manifest read_manifest(const fs::path& file) {
  if (!fs::exists(file)) bad("missing manifest " + file.string());
  auto in = open_in(file);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    bad("unparsable manifest: " + std::string(e.what()));
  }
  return manifest_from_json(j);
}

void write_ppm16(const CameraImage& img, const fs::path& file) {
  auto out = open_out(file);
  out << "P6\n" << img.model.width << ' ' << img.model.height << "\n65535\n";
  std::vector<unsigned char> buf(img.rgb.size() * 2);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(img.rgb[i], 0.0, 1.0) * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(q >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + file.string());
}

CameraImage read_ppm16(const fs::path& file, const CameraModel& model, const Pose& pose) {
  auto in = open_in(file);
  if (header_token(in) != "P6") bad(file.string() + " is not a binary PPM");
  const int w = header_int(in, file), h = header_int(in, file), maxval = header_int(in, file);
  if (w != model.width || h != model.height) bad(file.string() + " size does not match the camera model");
  if (maxval != 65535) bad(file.string() + " is not 16-bit");
  CameraImage img(model, pose);
  std::vector<unsigned char> buf(img.rgb.size() * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) bad(file.string() + " is truncated");
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    img.rgb[i] = ((static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1]) / 65535.0;
  }
  return img;
}

void write_pfm(const SonarImage& img, const fs::path& file) {
  auto out = open_out(file);
  out << "Pf\n" << img.model.n_azimuth_bins << ' ' << img.model.n_range_bins << "\n-1.0\n";
  std::vector<std::uint32_t> buf(img.intensities.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(img.intensities[i])));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + file.string());
}

SonarImage read_pfm(const fs::path& file, const SonarModel& model, const Pose& pose) {
  auto in = open_in(file);
  if (header_token(in) != "Pf") bad(file.string() + " is not a grayscale PFM");
  const int w = header_int(in, file), h = header_int(in, file);
  const std::string scale = header_token(in);
  if (w != model.n_azimuth_bins || h != model.n_range_bins) bad(file.string() + " size does not match the sonar");
  double s = 0.0;
  try {
    s = std::stod(scale);
  } catch (...) {
    bad("malformed PFM scale");
  }
  if (!(s < 0)) bad(file.string() + ": only little-endian PFM is supported");
  SonarImage img(model, pose);
  std::vector<std::uint32_t> buf(img.intensities.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * 4)) bad(file.string() + " is truncated");
  for (std::size_t i = 0; i < buf.size(); ++i) {
    img.intensities[i] = static_cast<double>(std::bit_cast<float>(to_little(buf[i]))) * -s;
  }
  return img;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) bad("dataset directory not found: " + dir.string());
  Dataset ds;
  ds.manifest = read_manifest(dir / "manifest.json");
  if (ds.manifest.frames.empty()) bad("manifest lists no frames");
  for (const auto& f : ds.manifest.frames) {
    if (!f.camera_image.empty()) ds.camera.push_back(read_ppm16(dir / f.camera_image, ds.manifest.camera, f.camera_pose));
    if (!f.sonar_image.empty()) ds.sonar.push_back(read_pfm(dir / f.sonar_image, ds.manifest.sonar, f.sonar_pose));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  const auto& frames = ds.manifest.frames;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i < ds.camera.size() && !frames[i].camera_image.empty()) {
      fs::create_directories((dir / frames[i].camera_image).parent_path(), ec);
      write_ppm16(ds.camera[i], dir / frames[i].camera_image);
    }
    if (i < ds.sonar.size() && !frames[i].sonar_image.empty()) {
      fs::create_directories((dir / frames[i].sonar_image).parent_path(), ec);
      write_pfm(ds.sonar[i], dir / frames[i].sonar_image);
    }
  }
  write_manifest(ds.manifest, dir / "manifest.json");
}

}  // namespace aofuse
