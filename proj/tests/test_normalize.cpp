#include "hazesplat/normalize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace hazesplat;

namespace {

FrameSet constant_frames(int n, float value, int size = 8) {
    FrameSet fs;
    for (int i = 0; i < n; ++i) {
        fs.frames.emplace_back(size, size, 3, value);
        fs.ids.push_back("f" + std::to_string(i));
    }
    return fs;
}

FrameSet textured_frames(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const ImageBuffer base = test_support::random_image(16, 16, 3, rng, 0.25f, 0.75f);
    FrameSet fs;
    for (int i = 0; i < n; ++i) {
        fs.frames.push_back(base);
        fs.ids.push_back("v" + std::to_string(i));
    }
    return fs;
}

}  // namespace

TEST_CASE("channel stats") {
    const ChannelStats c = channel_stats(ImageBuffer(3, 3, 3, 0.3f));
    for (int k = 0; k < 3; ++k) {
        CHECK(c.mean[k] == doctest::Approx(0.3));
        CHECK(c.std[k] == doctest::Approx(0.0));
    }
    ImageBuffer two(1, 2, 1);
    two.at(0, 1) = 1.0f;
    const ChannelStats s = channel_stats(two);
    CHECK(s.mean[0] == doctest::Approx(0.5));
    CHECK(s.std[0] == doctest::Approx(0.5));
}

TEST_CASE("normalize_to examples") {
    std::mt19937_64 rng(1);
    const ImageBuffer img = test_support::random_image(8, 8, 3, rng, 0.3f, 0.7f);
    const ImageBuffer same = normalize_to(img, channel_stats(img));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::fabs(same.data()[i] - img.data()[i]) < 1e-6f);

    const ImageBuffer flat = normalize_to(ImageBuffer(2, 2, 1, 0.2f), ChannelStats{{0.5}, {0.1}});
    for (float v : flat.values()) CHECK(v == doctest::Approx(0.5f));

    ImageBuffer two(1, 2, 1);
    two.at(0, 1) = 1.0f;
    const ImageBuffer mapped = normalize_to(two, ChannelStats{{0.5}, {0.25}});
    CHECK(mapped.at(0, 0) == doctest::Approx(0.25f));
    CHECK(mapped.at(0, 1) == doctest::Approx(0.75f));

    const ChannelStats target{{0.4, 0.5, 0.6}, {0.05, 0.08, 0.1}};
    const ChannelStats got = channel_stats(normalize_to(img, target));
    for (int k = 0; k < 3; ++k) {
        CHECK(got.mean[k] == doctest::Approx(target.mean[k]).epsilon(1e-6));
        CHECK(got.std[k] == doctest::Approx(target.std[k]).epsilon(1e-5));
    }
    CHECK_THROWS_AS(normalize_to(img, ChannelStats{{0.5}, {0.1}}), InvariantError);
}

TEST_CASE("normalize_to is idempotent") {
    std::mt19937_64 rng(2);
    const ImageBuffer img = test_support::random_image(8, 8, 3, rng);
    const ChannelStats target{{0.45, 0.5, 0.55}, {0.2, 0.25, 0.3}};
    const ImageBuffer once = normalize_to(img, target);
    const ImageBuffer twice = normalize_to(once, target);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::fabs(once.data()[i] - twice.data()[i]) < 0.02f);
    const ChannelStats mild{{0.5, 0.5, 0.5}, {0.1, 0.1, 0.1}};
    const ImageBuffer a = normalize_to(img, mild);
    const ImageBuffer b = normalize_to(a, mild);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a.data()[i] - b.data()[i]) < 1e-6f);
}

TEST_CASE("median reference") {
    const FrameSet same = textured_frames(4, 3);
    const ChannelStats m = median_reference(same);
    const ChannelStats f = channel_stats(same.frames[0]);
    for (int k = 0; k < 3; ++k) {
        CHECK(m.mean[k] == doctest::Approx(f.mean[k]));
        CHECK(m.std[k] == doctest::Approx(f.std[k]));
    }
    FrameSet three = constant_frames(3, 0.0f);
    three.frames[0] = ImageBuffer(8, 8, 3, 0.2f);
    three.frames[1] = ImageBuffer(8, 8, 3, 0.9f);
    three.frames[2] = ImageBuffer(8, 8, 3, 0.5f);
    CHECK(median_reference(three).mean[0] == doctest::Approx(0.5));
    FrameSet even = constant_frames(2, 0.0f);
    even.frames[0] = ImageBuffer(8, 8, 3, 0.6f);
    even.frames[1] = ImageBuffer(8, 8, 3, 0.4f);
    CHECK(median_reference(even).mean[0] == doctest::Approx(0.4));
}

TEST_CASE("max adjacent jump") {
    CHECK(max_adjacent_jump(constant_frames(4, 0.3f)) == 0.0);
    CHECK(max_adjacent_jump(constant_frames(1, 0.3f)) == 0.0);
    FrameSet two = constant_frames(2, 0.4f);
    two.frames[1] = ImageBuffer(8, 8, 3, 0.52f);
    CHECK(max_adjacent_jump(two) == doctest::Approx(0.12).epsilon(1e-6));
}

TEST_CASE("frame set validation") {
    FrameSet fs = constant_frames(2, 0.5f);
    fs.ids[1] = fs.ids[0];
    CHECK_THROWS_AS(fs.validate(), InvariantError);
    fs = constant_frames(2, 0.5f);
    fs.frames[1] = ImageBuffer(4, 4, 3);
    CHECK_THROWS_AS(fs.validate(), InvariantError);
    CHECK_THROWS_AS(FrameSet{}.validate(), InvariantError);
}

TEST_CASE("jitter injection") {
    const FrameSet base = textured_frames(5, 4);
    CHECK(inject_jitter(base, 0.0, 9).frames == base.frames);
    const FrameSet a = inject_jitter(base, 0.12, 9);
    const FrameSet b = inject_jitter(base, 0.12, 9);
    const FrameSet c = inject_jitter(base, 0.12, 10);
    CHECK(a.frames == b.frames);
    CHECK(a.frames != c.frames);
    CHECK(a.ids == base.ids);
    for (const auto& f : a.frames)
        for (float v : f.values()) CHECK((v >= 0.0f && v <= 1.0f));
    CHECK_THROWS_AS(inject_jitter(base, -0.1, 1), InvariantError);
}

TEST_CASE("jitter magnitude on constant frames") {
    const FrameSet flat = constant_frames(25, 0.5f);
    const double before = max_adjacent_jump(flat);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const double j = max_adjacent_jump(inject_jitter(flat, 0.12, seed));
        CHECK(j >= 0.03);
        CHECK(j <= 0.24);
        CHECK(j > 5.0 * before);
    }
}

TEST_CASE("median self-normalisation removes the jumps") {
    const FrameSet jittered = inject_jitter(textured_frames(25, 5), 0.12, 3);
    CHECK(max_adjacent_jump(jittered) >= 0.03);
    const ChannelStats ref = median_reference(jittered);
    FrameSet out = jittered;
    for (auto& f : out.frames) f = normalize_to(f, ref);
    CHECK(max_adjacent_jump(out) <= 0.005);
}
