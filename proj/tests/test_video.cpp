#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "doctest.h"
#include "helpers.hpp"

using namespace pavad;

TEST_CASE("clip validates shape and range") {
    CHECK_NOTHROW(VideoClip(Tensorf({2, 3, 16, 16}), "ok"));
    CHECK_THROWS_AS(VideoClip(Tensorf({2, 1, 16, 16}), "gray"), Error);
    CHECK_THROWS_AS(VideoClip(Tensorf({2, 3, 20, 16}), "odd"), Error);
    CHECK_THROWS_AS(VideoClip(Tensorf({0, 3, 16, 16}), "empty"), Error);
    CHECK_THROWS_AS(VideoClip(Tensorf({1, 3, 16, 16}, 1.5f), "hot"), Error);
}

TEST_CASE("window counts") {
    const VideoClip clip = testutil::random_clip(32, 16, 16, 1);
    CHECK(windows(clip, 16, 1).size() == 17);
    CHECK(window_count(32, 16, 3) == 6);

    const VideoClip one = testutil::random_clip(16, 16, 16, 2);
    const auto w = windows(one, 16, 1);
    REQUIRE(w.size() == 1);
    CHECK(w[0].frames() == one.frames());
}

TEST_CASE("window errors") {
    const VideoClip clip = testutil::random_clip(15, 16, 16, 3);
    try {
        windows(clip, 16, 1);
        FAIL("expected a windowing error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Windowing);
    }
    CHECK_THROWS_AS(window_count(32, 16, 0), Error);
}

TEST_CASE("window coverage") {
    const VideoClip clip = testutil::random_clip(23, 16, 16, 4);
    for (int stride : {1, 2, 5}) {
        const auto w = windows(clip, 8, stride);
        for (std::size_t k = 0; k < w.size(); ++k) {
            const int start = static_cast<int>(k) * stride;
            CHECK(start + 8 <= clip.length());
            CHECK(w[k].frames() == clip.slice(start, 8).frames());
        }
        CHECK(static_cast<int>(w.size()) == (23 - 8) / stride + 1);
    }
}

TEST_CASE("load_clip maps bytes to [-1, 1] and resizes") {
    testutil::TempDir dir("load");
    for (int t = 0; t < 16; ++t) {
        cv::Mat white(40, 60, CV_8UC3, cv::Scalar(255, 255, 255));
        char name[16];
        std::snprintf(name, sizeof name, "%03d.png", t);
        cv::imwrite((dir.path() / name).string(), white);
    }
    const VideoClip clip = load_clip(dir.path(), 256, 256);
    CHECK(clip.frames().shape() == std::vector<int>{16, 3, 256, 256});
    for (float v : clip.frames().values()) REQUIRE(v == 1.0f);
}

TEST_CASE("load_clip keeps RGB order and sorted frame order") {
    testutil::TempDir dir("order");
    cv::Mat red(16, 16, CV_8UC3, cv::Scalar(0, 0, 255));  // BGR
    cv::Mat black(16, 16, CV_8UC3, cv::Scalar(0, 0, 0));
    cv::imwrite((dir / "b.png").string(), black);
    cv::imwrite((dir / "a.png").string(), red);
    const VideoClip clip = load_clip(dir.path(), 16, 16);
    CHECK(clip.frames().at(0, 0, 0, 0) == 1.0f);
    CHECK(clip.frames().at(0, 2, 0, 0) == -1.0f);
    CHECK(clip.frames().at(1, 0, 0, 0) == -1.0f);
}

TEST_CASE("load_clip ingestion errors") {
    testutil::TempDir dir("bad");
    try {
        load_clip(dir.path(), 16, 16);
        FAIL("expected an ingestion error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Ingestion);
    }
    std::ofstream(dir / "000.png") << "not an image";
    try {
        load_clip(dir.path(), 16, 16);
        FAIL("expected an ingestion error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Ingestion);
        CHECK(std::string(e.what()).find("000.png") != std::string::npos);
    }
}

TEST_CASE("byte mapping endpoints") {
    CHECK(from_byte(0) == -1.0f);
    CHECK(from_byte(255) == 1.0f);
    for (int b = 0; b < 256; ++b) CHECK(to_byte(from_byte(static_cast<unsigned char>(b))) == b);
}

TEST_CASE("labels round trip and reject non-binary values") {
    testutil::TempDir dir("labels");
    save_labels(dir / "v.json", {"v", {0, 1, 1, 0}});
    CHECK(load_labels(dir / "v.json").labels == std::vector<int>{0, 1, 1, 0});
    std::ofstream(dir / "w.json") << "[0, 2]";
    CHECK_THROWS_AS(load_labels(dir / "w.json"), Error);
}
