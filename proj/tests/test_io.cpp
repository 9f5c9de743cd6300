#include <cstring>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pavad/checkpoint.hpp"
#include "pavad/io.hpp"
#include "pavad/models.hpp"

using namespace pavad;

TEST_CASE("array files round trip") {
    testutil::TempDir dir("array");
    const Tensorf t = testutil::random_tensor({2, 3, 4}, 5);
    write_array(dir / "a.bin", t);
    CHECK(read_array(dir / "a.bin") == t);
}

TEST_CASE("derived seeds are deterministic and spread") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("checkpoint round trip is bit-exact") {
    testutil::TempDir dir("ckpt");
    Autoencoder<float> ae(AutoencoderConfig::scaled(8), 3);
    Checkpoint c;
    c.kind = "spatial-ae";
    c.epoch = 4;
    c.meta["note"] = "x";
    for (auto* p : ae.parameters()) c.arrays["param/" + p->name] = p->value;
    for (const auto& b : ae.buffers()) c.arrays["buffer/" + b.name] = *b.value;
    save_checkpoint(dir / "c.ckpt", c);
    const Checkpoint d = load_checkpoint(dir / "c.ckpt");
    CHECK(d.kind == "spatial-ae");
    CHECK(d.epoch == 4);
    CHECK(d.meta["note"] == "x");
    REQUIRE(d.arrays.size() == c.arrays.size());
    for (const auto& [name, t] : c.arrays) {
        const Tensorf& u = d.get(name);
        REQUIRE(u.shape() == t.shape());
        CHECK(std::memcmp(u.data(), t.data(), t.size() * sizeof(float)) == 0);
    }
    CHECK_FALSE(std::filesystem::exists(dir / "c.ckpt.tmp"));
}

TEST_CASE("corrupt checkpoints are rejected") {
    testutil::TempDir dir("bad_ckpt");
    std::ofstream(dir / "junk.ckpt") << "hello";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), Error);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);

    Checkpoint c;
    c.kind = "discriminator";
    c.arrays["param/w"] = Tensorf({64, 64}, 1.0f);
    save_checkpoint(dir / "t.ckpt", c);
    const auto size = std::filesystem::file_size(dir / "t.ckpt");
    std::filesystem::resize_file(dir / "t.ckpt", size - 100);
    try {
        load_checkpoint(dir / "t.ckpt");
        FAIL("expected a checkpoint error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Checkpoint);
    }
}

TEST_CASE("restore checks shapes") {
    Checkpoint c;
    c.arrays["a"] = Tensorf({2, 2});
    Tensorf wrong({3});
    CHECK_THROWS_AS(c.restore("a", wrong), Error);
    CHECK_THROWS_AS(c.get("b"), Error);
}
