import json

import pytest

from openbook.config import RunConfig, bundled_configs, load_config, parse_config
from openbook.errors import ConfigError
from openbook.profiles import kappa_catalogue


class TestBundledConfigs:
    def test_names(self):
        """Inputs: The package config directory.
        Expected: annulus-twist-k, small-periods and tight-s3-disk.
        Checks: bundled_configs.
        """
        assert bundled_configs() == ["annulus-twist-k", "small-periods", "tight-s3-disk"]

    @pytest.mark.parametrize("name", ["annulus-twist-k", "small-periods", "tight-s3-disk"])
    def test_every_bundled_config_loads(self, name):
        """Inputs: Each bundled config.
        Expected: A RunConfig whose name matches the file name.
        Checks: Bundled configs are valid.
        """
        config = load_config(name)
        assert isinstance(config, RunConfig)
        assert config.name == name

    def test_tight_disk(self):
        """Inputs: tight-s3-disk.
        Expected: Disk page, identity monodromy, kappa = -sqrt(2)/100, eps = 0.01.
        Checks: Config content and open book construction.
        """
        config = load_config("tight-s3-disk")
        spec = config.open_book()
        assert spec.page.kind == "disk"
        assert spec.monodromy.kind == "identity"
        assert config.profile.kappa_value == kappa_catalogue()["sqrt2_e2"]
        assert config.epsilon == 0.01

    def test_annulus_twist(self):
        """Inputs: annulus-twist-k.
        Expected: Annulus page with a Dehn twist and two bindings.
        Checks: Twists become a Monodromy.
        """
        spec = load_config("annulus-twist-k").open_book()
        assert spec.n_bindings == 2
        assert spec.monodromy.kind == "dehn_twists"

    def test_small_periods(self):
        """Inputs: small-periods.
        Expected: The small-period audit is enabled with c = 0.001.
        Checks: Config content.
        """
        config = load_config("small-periods")
        assert config.small_periods
        assert config.profile.c == 0.001


class TestValidation:
    def test_defaults(self):
        """Inputs: An empty mapping.
        Expected: The defaults describe the tight disk.
        Checks: Every section has defaults.
        """
        config = parse_config({})
        assert config.page.kind == "disk"
        assert config.grid.shs_resolution == 50

    def test_unknown_key(self):
        """Inputs: {"colour": "red"}.
        Expected: ConfigError listing the field.
        Checks: Unknown keys are rejected.
        """
        with pytest.raises(ConfigError) as err:
            parse_config({"colour": "red"})
        assert err.value.fields == ["colour"]

    def test_infeasible_profile_names_constraint(self):
        """Inputs: delta_prime = 0.01 < delta.
        Expected: ConfigError naming "delta_prime > delta" and the profile field.
        Checks: Profile feasibility reaches the config layer.
        """
        with pytest.raises(ConfigError, match="delta_prime > delta") as err:
            parse_config({"profile": {"delta_prime": 0.01}})
        assert err.value.fields == ["profile"]

    def test_uncatalogued_kappa(self):
        """Inputs: kappa = -0.25 and kappa = "golden".
        Expected: ConfigError for both.
        Checks: Only catalogued slopes are accepted.
        """
        with pytest.raises(ConfigError, match="irrational catalogue"):
            parse_config({"profile": {"kappa": -0.25}})
        with pytest.raises(ConfigError, match="unknown kappa name"):
            parse_config({"profile": {"kappa": "golden"}})

    def test_catalogued_kappa_value(self):
        """Inputs: kappa given as the numeric catalogue value.
        Expected: Accepted.
        Checks: Numbers matching a catalogue entry pass.
        """
        value = kappa_catalogue()["pi_e3"]
        assert parse_config({"profile": {"kappa": value}}).profile.kappa_value == value

    @pytest.mark.parametrize("resolution", [49, 201])
    def test_grid_bounds(self, resolution):
        """Inputs: shs_resolution outside [50, 200].
        Expected: ConfigError on grid.shs_resolution.
        Checks: Field bounds.
        """
        with pytest.raises(ConfigError) as err:
            parse_config({"grid": {"shs_resolution": resolution}})
        assert err.value.fields == ["grid.shs_resolution"]

    def test_unknown_tolerance(self):
        """Inputs: grid.tolerances = {"speed": 1}.
        Expected: ConfigError.
        Checks: Tolerance names are checked against the defaults.
        """
        with pytest.raises(ConfigError, match="unknown tolerance"):
            parse_config({"grid": {"tolerances": {"speed": 1.0}}})

    def test_unbuildable_open_book(self):
        """Inputs: A twist band outside the annulus.
        Expected: ConfigError naming the twist band.
        Checks: The open book is built during validation.
        """
        data = {"page": {"kind": "annulus"}, "twists": [{"r_start": 0.1, "r_end": 2.0, "count": 1}]}
        with pytest.raises(ConfigError, match="twist band"):
            parse_config(data)

    def test_configs_are_frozen(self):
        """Inputs: Assignment to a field.
        Expected: An error; configs are immutable.
        Checks: frozen models.
        """
        config = parse_config({})
        with pytest.raises(Exception):
            config.epsilon = 0.5


class TestOverrides:
    def test_dotted_override(self):
        """Inputs: {"grid.shs_resolution": 60, "epsilon": 0.02}.
        Expected: A new config with both values; the original is unchanged.
        Checks: with_overrides.
        """
        config = load_config("tight-s3-disk")
        changed = config.with_overrides({"grid.shs_resolution": 60, "epsilon": 0.02})
        assert changed.grid.shs_resolution == 60
        assert changed.epsilon == 0.02
        assert config.epsilon == 0.01

    @pytest.mark.parametrize("key", ["grid.nothing", "nothing.at_all", "epsilon.value"])
    def test_unknown_override(self, key):
        """Inputs: Override paths that do not exist.
        Expected: ConfigError with the dotted key in fields.
        Checks: Override path validation.
        """
        with pytest.raises(ConfigError) as err:
            load_config("tight-s3-disk").with_overrides({key: 1})
        assert err.value.fields == [key]


class TestLoadConfig:
    def test_from_file(self, tmp_path):
        """Inputs: A JSON file with a name and a smaller epsilon.
        Expected: The file values are used.
        Checks: Loading from a path.
        """
        path = tmp_path / "mine.json"
        path.write_text(json.dumps({"name": "mine", "epsilon": 0.005}), encoding="utf-8")
        config = load_config(path)
        assert (config.name, config.epsilon) == ("mine", 0.005)

    def test_missing_source(self):
        """Inputs: A name that is neither a file nor a bundled config.
        Expected: ConfigError.
        Checks: Source resolution.
        """
        with pytest.raises(ConfigError, match="no config file"):
            load_config("does-not-exist")

    def test_invalid_json(self, tmp_path):
        """Inputs: A file with broken JSON.
        Expected: ConfigError mentioning JSON.
        Checks: Decoder errors are wrapped.
        """
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)
