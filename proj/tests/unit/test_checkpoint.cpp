// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vkg/checkpoint.hpp"
#include "vkg/errors.hpp"

using namespace vkg;

namespace {

std::filesystem::path tmp(const char* name) { return std::filesystem::temp_directory_path() / name; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("values round trip as float32") {
    auto a = Tensor::parameter({2, 3}, {0.1, -2.5, 3.0e-7, 1e10, -0.0, 1.0 / 3.0});
    auto b = Tensor::parameter({4}, {1, 2, 3, 4});
    const ParamList params{{"a", a, true}, {"b", b, false}};
    save_checkpoint(tmp("vkg_ck1.bin"), {{"hello", 3}}, params);
    const auto data = load_checkpoint(tmp("vkg_ck1.bin"));
    CHECK(data.meta.at("hello") == 3);
    REQUIRE(data.tensors.size() == 2);
    const auto* sa = data.find("a");
    REQUIRE(sa != nullptr);
    CHECK(sa->shape == Shape{2, 3});
    for (std::size_t i = 0; i < 6; ++i) {
      const float expect = static_cast<float>(a.data()[i]);
      CHECK(std::memcmp(&sa->values[i], &expect, sizeof(float)) == 0);
    }
    CHECK(data.find("zzz") == nullptr);

    auto a2 = Tensor::parameter({2, 3}, std::vector<double>(6, 9.0));
    auto b2 = Tensor::parameter({4}, std::vector<double>(4, 9.0));
    restore_params(data, {{"a", a2, true}, {"b", b2, false}});
    for (std::size_t i = 0; i < 6; ++i) CHECK(a2.data()[i] == static_cast<double>(static_cast<float>(a.data()[i])));
    CHECK(b2.data()[3] == 4.0);

    // Saving the restored values reproduces the file byte for byte.
    save_checkpoint(tmp("vkg_ck2.bin"), {{"hello", 3}}, {{"a", a2, true}, {"b", b2, false}});
    CHECK(slurp(tmp("vkg_ck1.bin")) == slurp(tmp("vkg_ck2.bin")));
    std::filesystem::remove(tmp("vkg_ck2.bin"));
  }

  TEST_CASE("layout starts with magic and version") {
    save_checkpoint(tmp("vkg_ck1.bin"), nlohmann::json::object(), {{"x", Tensor::parameter({1}, {1.5}), true}});
    const auto bytes = slurp(tmp("vkg_ck1.bin"));
    REQUIRE(bytes.size() > 16);
    CHECK(bytes.substr(0, 4) == "VKG1");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    CHECK(version == kCheckpointVersion);
    float last = 0;
    std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
    CHECK(last == 1.5f);
  }

  TEST_CASE("restore rejects missing names and wrong shapes") {
    save_checkpoint(tmp("vkg_ck1.bin"), nlohmann::json::object(), {{"x", Tensor::parameter({2}, {1, 2}), true}});
    const auto data = load_checkpoint(tmp("vkg_ck1.bin"));
    CHECK_THROWS_AS(restore_params(data, {{"y", Tensor::parameter({2}, {0, 0}), true}}), FormatError);
    CHECK_THROWS_AS(restore_params(data, {{"x", Tensor::parameter({3}, {0, 0, 0}), true}}), FormatError);
  }

  TEST_CASE("corrupt files are format errors") {
    save_checkpoint(tmp("vkg_ck1.bin"), nlohmann::json::object(), {{"x", Tensor::parameter({2}, {1, 2}), true}});
    const auto good = slurp(tmp("vkg_ck1.bin"));
    spit(tmp("vkg_ck3.bin"), "NOPE" + good.substr(4));
    CHECK_THROWS_AS((void)load_checkpoint(tmp("vkg_ck3.bin")), FormatError);
    spit(tmp("vkg_ck3.bin"), good.substr(0, good.size() - 2));
    CHECK_THROWS_AS((void)load_checkpoint(tmp("vkg_ck3.bin")), FormatError);
    spit(tmp("vkg_ck3.bin"), good.substr(0, 10));
    CHECK_THROWS_AS((void)load_checkpoint(tmp("vkg_ck3.bin")), FormatError);
    auto bad_version = good;
    bad_version[4] = 9;
    spit(tmp("vkg_ck3.bin"), bad_version);
    CHECK_THROWS_AS((void)load_checkpoint(tmp("vkg_ck3.bin")), FormatError);
    std::filesystem::remove(tmp("vkg_ck3.bin"));
    std::filesystem::remove(tmp("vkg_ck1.bin"));
    CHECK_THROWS_AS((void)load_checkpoint(tmp("vkg_missing.bin")), IoError);
  }
}
