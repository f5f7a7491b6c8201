import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chtsurrogate.datapipe import (
    DatasetError,
    DatasetManifest,
    GridField,
    ScalerParams,
    UnstructuredMesh,
    apply_scaler,
    assemble_dataset,
    disk_rect_area,
    fit_scaler,
    geometry_to_image,
    invert_scaler,
    load_dataset,
    load_manifest,
    ny_for,
    rasterize,
    rasterize_values,
    save_dataset,
    split_dataset,
)
from chtsurrogate.solver import DomainSpec, PinLayout, sample_layouts

from oracles import monte_carlo_pixels, random_triangulation


def structured(nx, ny, w, h, rng):
    x = np.sort(np.r_[0, rng.uniform(0, w, nx - 1), w])
    y = np.sort(np.r_[0, rng.uniform(0, h, ny - 1), h])
    vals = rng.normal(size=(ny, nx))
    return UnstructuredMesh.from_structured(x, y, {"f": vals}), x, y, vals


class TestRasterize:
    def test_constant_field(self, rng):
        mesh, _, _ = random_triangulation(rng)
        mesh.values["c"] = np.full(mesh.n_cells, 3.25)
        g = rasterize(mesh, "c", 7)
        np.testing.assert_allclose(g.values, 3.25, rtol=1e-7)

    def test_diagonal_split_pixel(self):
        tri = [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]]
        # bbox 2x1 with n_x = 2 gives two unit pixels; cover the second with one square
        mesh = UnstructuredMesh(tri + [[(1, 0), (2, 0), (2, 1), (1, 1)]], {"f": [1.0, 3.0, 5.0]})
        g = rasterize(mesh, "f", 2)
        assert g.shape == (1, 2)
        assert g.values[0, 0] == 2.0 and g.values[0, 1] == 5.0

    @pytest.mark.parametrize("n_x, expected", [(50, 95), (100, 190), (200, 380), (400, 761)])
    def test_row_count_chain(self, n_x, expected):
        d = DomainSpec()
        assert ny_for(n_x, d.L_x, d.L_y) == expected

    def test_square_pixels_and_float32(self, rng):
        mesh, _, _ = random_triangulation(rng, width=2.0, height=1.0)
        g = rasterize(mesh, "f", 8)
        assert g.shape == (4, 8) and g.pixel_size == 0.25
        assert g.values.dtype == np.float32

    @pytest.mark.parametrize("seed", range(3))
    def test_monte_carlo_oracle(self, seed):
        rng = np.random.default_rng(seed)
        mesh, tri, values = random_triangulation(rng)
        g = rasterize(mesh, "f", 2)
        mc = monte_carlo_pixels(tri, values, 2, 2, 0.5, rng)
        assert np.max(np.abs(g.values - mc)) < 1e-3

    @pytest.mark.parametrize("seed", range(5))
    def test_conservation_on_partition(self, seed):
        rng = np.random.default_rng(seed)
        mesh, _, _, vals = structured(13, 9, 1.0, 0.75, rng)
        g = rasterize(mesh, "f", 12)
        cell_mean = np.sum(mesh.areas * mesh.values["f"]) / mesh.areas.sum()
        pix_mean = np.mean(g.values.astype(np.float64))
        # float32 storage bounds the attainable agreement
        assert abs(pix_mean - cell_mean) <= 1e-6 * max(abs(cell_mean), np.abs(vals).mean())

    def test_conservation_exact_in_float64(self, rng):
        mesh, _, _, _ = structured(11, 7, 1.0, 0.5, rng)
        vals, _ = rasterize_values(mesh, "f", 10)
        cell_mean = np.sum(mesh.areas * mesh.values["f"]) / mesh.areas.sum()
        assert abs(np.mean(vals) - cell_mean) <= 1e-9 * np.abs(mesh.values["f"]).mean()

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone(self, seed):
        rng = np.random.default_rng(seed)
        mesh, _, values = random_triangulation(rng)
        g = rasterize(mesh, "f", 9).values
        assert g.min() >= np.float32(values.min()) and g.max() <= np.float32(values.max())

    def test_uncovered_pixel(self):
        mesh = UnstructuredMesh([[(0, 0), (1, 0), (1, 1), (0, 1)]], {"f": [1.0]}, bbox=(0, 0, 2, 1))
        with pytest.raises(ValueError, match="not covered"):
            rasterize(mesh, "f", 2)

    @pytest.mark.parametrize("poly", [
        [(0, 0), (1, 0), (2, 0)],                     # zero area
        [(0, 0), (2, 0), (1, 0.2), (1, 2)],           # non-convex
        [(0, 0), (1, 0)],                             # too few vertices
    ])
    def test_degenerate_polygon(self, poly):
        with pytest.raises(ValueError):
            UnstructuredMesh([poly], {"f": [0.0]})

    def test_n_x_precondition(self, rng):
        mesh, _, _ = random_triangulation(rng)
        with pytest.raises(ValueError):
            rasterize(mesh, "f", 1)


class TestGeometryImage:
    def test_inside_outside(self):
        lay = PinLayout([[0.5, 0.5]], [0.3])
        g = geometry_to_image(lay, 10, (0, 0, 1, 1)).values
        assert g[5, 5] == 1.0 and g[0, 0] == 0.0
        assert np.all((g >= 0) & (g <= 1))

    @pytest.mark.parametrize("seed", [0, 1])
    def test_total_solid_area(self, seed):
        d = DomainSpec()
        (lay,) = sample_layouts(1, seed)
        g = geometry_to_image(lay, 200, d.bbox)
        total = g.values.astype(np.float64).sum() * g.pixel_size ** 2
        exact = np.sum(np.pi * lay.radii ** 2)
        assert abs(total - exact) / exact < 0.005

    def test_disk_rect_area_monte_carlo(self, rng):
        cx, cy, r = 0.31, -0.12, 0.4
        rects = np.array([[0.0, 0.5, -0.3, 0.1], [-0.2, 0.2, 0.1, 0.3], [0.6, 0.75, -0.2, 0.0]])
        got = disk_rect_area(cx, cy, r, *rects.T)
        for (x0, x1, y0, y1), a in zip(rects, got):
            p = rng.uniform((x0, y0), (x1, y1), (400_000, 2))
            mc = np.mean(np.hypot(p[:, 0] - cx, p[:, 1] - cy) < r) * (x1 - x0) * (y1 - y0)
            assert abs(a - mc) < 4e-3 * (x1 - x0) * (y1 - y0)

    def test_whole_disk(self):
        assert disk_rect_area(0, 0, 1.0, -2, 2, -2, 2) == pytest.approx(np.pi, rel=1e-14)


class TestScalers:
    def test_zscore_example(self):
        p = fit_scaler([1.0, 2.0, 3.0], "zscore")
        np.testing.assert_allclose(apply_scaler([1.0, 2.0, 3.0], p), [-np.sqrt(1.5), 0, np.sqrt(1.5)], rtol=1e-12)

    def test_minmax_endpoints(self, rng):
        y = rng.normal(size=100)
        p = fit_scaler(y, "minmax")
        assert apply_scaler(y.min(), p) == 0.0 and apply_scaler(y.max(), p) == 1.0

    @pytest.mark.parametrize("kind", ["minmax", "zscore"])
    def test_degenerate(self, kind):
        with pytest.raises(ValueError):
            fit_scaler(np.full(5, 2.0), kind)

    @pytest.mark.parametrize("kind, a, b", [("minmax", 1.0, 1.0), ("zscore", 0.0, 0.0), ("bogus", 0, 1)])
    def test_params_validated(self, kind, a, b):
        with pytest.raises(ValueError):
            ScalerParams(kind, a, b)

    def test_none_is_identity(self, rng):
        y = rng.normal(size=7)
        assert np.array_equal(apply_scaler(y, fit_scaler(y, "none")), y)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e4, 1e4)), st.sampled_from(["minmax", "zscore"]))
    def test_round_trip(self, y, kind):
        if np.ptp(y) <= 1e-6 * max(1.0, np.abs(y).max()):
            return
        p = fit_scaler(y, kind)
        back = invert_scaler(apply_scaler(y, p), p)
        np.testing.assert_allclose(back, y, rtol=1e-6, atol=1e-6 * np.abs(y).max())

    def test_dict_round_trip(self):
        for p in (ScalerParams("minmax", -1, 2), ScalerParams("zscore", 3, 0.5), ScalerParams("none")):
            assert ScalerParams.from_dict(p.to_dict()) == p


class TestSplit:
    def test_ten_samples(self):
        m = split_dataset([f"s{i}" for i in range(10)])
        assert [len(m.ids(s)) for s in ("train", "val", "test")] == [8, 1, 1]

    def test_rounding_favors_train(self):
        m = split_dataset(range(17))
        assert [len(m.ids(s)) for s in ("train", "val", "test")] == [15, 1, 1]

    def test_deterministic(self):
        a = split_dataset(range(30), seed=4).splits
        assert a == split_dataset(range(30), seed=4).splits
        assert a != split_dataset(range(30), seed=5).splits

    def test_all_train(self):
        m = split_dataset(range(5), (1, 0, 0))
        assert m.ids("train") == list(range(5))

    @pytest.mark.parametrize("n, fr", [(5, (0.8, 0.1, 0.1)), (2, (0.5, 0.25, 0.25))])
    def test_empty_split_error(self, n, fr):
        with pytest.raises(ValueError):
            split_dataset(range(n), fr)

    def test_fraction_sum(self):
        with pytest.raises(ValueError):
            split_dataset(range(10), (0.5, 0.1, 0.1))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(10, 200), st.integers(0, 1000))
    def test_disjoint_cover(self, n, seed):
        m = split_dataset(range(n), seed=seed)
        assert sorted(m.splits) == list(range(n))
        assert len(m.ids("train")) >= int(0.8 * n)


def tiny_manifest(rng, n=4, res=(3, 2)):
    m = split_dataset([f"a{i}" for i in range(n)], (0.5, 0.25, 0.25))
    m.resolution = res
    m.pixel_size = 0.1
    m.fields = {"p": {"units": "Pa"}}
    m.scalers = {"p": ScalerParams("none")}
    arrays = {"p": {sid: rng.normal(size=res).astype(np.float32) for sid in m.splits}}
    return m, arrays


class TestStorage:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        m, arrays = tiny_manifest(rng)
        save_dataset(tmp_path, m, arrays)
        m2, a2 = load_dataset(tmp_path)
        assert m2.splits == m.splits and m2.resolution == m.resolution
        for sid, v in arrays["p"].items():
            assert a2["p"][sid].tobytes() == v.tobytes()
        assert (tmp_path / "samples" / "a0" / "status.json").exists()

    def test_checksum_failure_names_sample(self, tmp_path, rng):
        m, arrays = tiny_manifest(rng)
        save_dataset(tmp_path, m, arrays)
        path = tmp_path / "samples" / "a2" / "p.f32"
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(DatasetError, match="a2"):
            load_dataset(tmp_path)

    def test_missing_file(self, tmp_path, rng):
        m, arrays = tiny_manifest(rng)
        save_dataset(tmp_path, m, arrays)
        (tmp_path / "samples" / "a1" / "p.f32").unlink()
        with pytest.raises(DatasetError, match="a1"):
            load_dataset(tmp_path)

    def _edit_manifest(self, path, fn):
        d = json.loads((path / "manifest.json").read_text())
        fn(d)
        (path / "manifest.json").write_text(json.dumps(d))

    def test_overlapping_splits(self, tmp_path, rng):
        m, arrays = tiny_manifest(rng)
        save_dataset(tmp_path, m, arrays)
        self._edit_manifest(tmp_path, lambda d: d["splits"].append({"id": "a0", "split": "test"}))
        with pytest.raises(DatasetError, match="more than one split"):
            load_manifest(tmp_path)

    def test_version_mismatch(self, tmp_path, rng):
        m, arrays = tiny_manifest(rng)
        save_dataset(tmp_path, m, arrays)
        self._edit_manifest(tmp_path, lambda d: d.update(version=99))
        with pytest.raises(DatasetError, match="version"):
            load_manifest(tmp_path)

    def test_shape_mismatch_on_save(self, tmp_path, rng):
        m, arrays = tiny_manifest(rng)
        arrays["p"]["a0"] = np.zeros((2, 2))
        with pytest.raises(DatasetError):
            save_dataset(tmp_path, m, arrays)

    def test_manifest_round_trip(self, rng):
        m, _ = tiny_manifest(rng)
        m.checksums = {sid: {"p": "0"} for sid in m.splits}
        assert DatasetManifest.from_dict(m.to_dict()).to_dict() == m.to_dict()


class TestAssemble:
    def test_layout_and_scalers(self, tiny_dataset):
        m, arrays = load_dataset(tiny_dataset)
        assert m.resolution == (30, 16)
        assert set(arrays) == {"geometry", "p", "vel", "T"}
        assert {m.scalers[f].kind for f in ("p", "vel", "T")} == {"none", "zscore"}
        assert m.scalers["p"].kind == "none" and m.input_scalers["vel"].kind == "minmax"
        train = np.stack([arrays["T"][i] for i in m.ids("train")]).astype(np.float64)
        assert m.scalers["T"].a == pytest.approx(train.mean(), rel=1e-12)
        assert m.scalers["T"].b == pytest.approx(train.std(), rel=1e-9)
        assert len(m.provenance["generator_config_sha256"]) == 64

    def test_geometry_matches_layout(self, tiny_dataset, tiny_datagen):
        from chtsurrogate.solver import load_sample

        m, arrays = load_dataset(tiny_dataset)
        sid = m.ids("train")[0]
        s = load_sample(tiny_datagen / sid)
        g = geometry_to_image(s["layout"], 16, s["domain"].bbox).values
        assert np.array_equal(arrays["geometry"][sid], g)

    def test_excludes_unconverged(self, tiny_datagen, tmp_path):
        import shutil

        src = tmp_path / "dg"
        shutil.copytree(tiny_datagen, src)
        st_path = src / "s00004" / "status.json"
        st_ = json.loads(st_path.read_text())
        st_path.write_text(json.dumps({**st_, "converged": False}))
        m = assemble_dataset(src, tmp_path / "ds", 16, fractions=(0.6, 0.2, 0.2))
        assert "s00004" not in m.splits and m.provenance["excluded"] == ["s00004"]
        assert len(m.splits) == 5


def test_gridfield_requires_2d():
    with pytest.raises(ValueError):
        GridField(np.zeros(3), 1.0)
