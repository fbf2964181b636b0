import json
import logging
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from openbook.errors import ConfigError, ConstructionError
from openbook.geometry import DEFAULT_TOLERANCES, DehnTwist, Monodromy, OpenBookSpec, PageModel, build_manifold
from openbook.profiles import ProfileParams, kappa_catalogue, kappa_name

logger = logging.getLogger(__name__)

CONFIG_PACKAGE = "openbook.configs"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PageConfig(_Strict):
    kind: Literal["disk", "annulus"] = "disk"
    radius: float = 1.0
    inner_radius: float = 0.5
    outer_radius: float = 1.5


class TwistConfig(_Strict):
    r_start: float
    r_end: float
    count: int


class ProfileConfig(_Strict):
    """Profile parameters; ``kappa`` is a catalogue name or a catalogued value."""

    c: float = 0.1
    kappa: Union[str, float] = "sqrt2_e2"
    delta: float = 0.05
    delta_prime: float = 0.1
    rho1: float = 0.25
    rho2: float = 0.5

    @field_validator("kappa")
    @classmethod
    def _catalogued(cls, value: Union[str, float]) -> Union[str, float]:
        catalogue = kappa_catalogue()
        if isinstance(value, str):
            if value not in catalogue:
                raise ValueError(f"unknown kappa name {value!r}; choose one of {sorted(catalogue)}")
        elif kappa_name(float(value)) is None:
            raise ValueError(f"kappa={value!r} is not in the irrational catalogue")
        return value

    @model_validator(mode="after")
    def _feasible(self) -> "ProfileConfig":
        broken = self.params().violations()
        if broken:
            raise ValueError("violated: " + ", ".join(broken))
        return self

    @property
    def kappa_value(self) -> float:
        return kappa_catalogue()[self.kappa] if isinstance(self.kappa, str) else float(self.kappa)

    def params(self) -> ProfileParams:
        return ProfileParams(self.c, self.kappa_value, self.delta, self.delta_prime, self.rho1, self.rho2)


class GridConfig(_Strict):
    shs_resolution: int = Field(50, ge=50, le=200)
    profile_grid: int = Field(10_000, ge=100, le=1_000_000)
    fd_step: float = Field(1e-3, gt=0.0)
    richardson_step: float = Field(1e-2, gt=0.0)
    richardson_s_end: float = Field(10.0, gt=0.0)
    tolerances: Dict[str, float] = Field(default_factory=dict)

    @field_validator("tolerances")
    @classmethod
    def _known_positive(cls, value: Dict[str, float]) -> Dict[str, float]:
        for key, tol in value.items():
            if key not in DEFAULT_TOLERANCES:
                raise ValueError(f"unknown tolerance {key!r}; choose from {sorted(DEFAULT_TOLERANCES)}")
            if not tol > 0.0:
                raise ValueError(f"tolerance {key!r} must be positive")
        return value


class IntegratorConfig(_Strict):
    tol: float = Field(1e-10, gt=0.0)
    s_max: float = Field(400.0, gt=0.0)
    rho_stop: float = Field(1e-6, gt=0.0, lt=1.0)


class FoliationConfig(_Strict):
    n_pages: int = Field(16, ge=2)
    n_points: int = Field(100_000, ge=1)
    seed: int = 0


class IndexConfig(_Strict):
    k_max: Optional[int] = Field(None, ge=1)
    oracle_up_to: int = Field(3, ge=0)


class OutputConfig(_Strict):
    directory: str = "runs"
    csv: bool = True
    svg: bool = True


class RunConfig(_Strict):
    """Everything :func:`openbook.pipeline.run_pipeline` needs."""

    name: str = "run"
    page: PageConfig = PageConfig()
    twists: List[TwistConfig] = Field(default_factory=list)
    profile: ProfileConfig = ProfileConfig()
    epsilon: float = Field(0.01, ge=0.0)
    tau_margin: float = Field(0.1, gt=0.0, lt=0.5)
    small_periods: bool = False
    grid: GridConfig = GridConfig()
    integrator: IntegratorConfig = IntegratorConfig()
    foliation: FoliationConfig = FoliationConfig()
    index: IndexConfig = IndexConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _buildable(self) -> "RunConfig":
        try:
            build_manifold(self.open_book())
        except ConstructionError as exc:
            raise ValueError(str(exc)) from exc
        return self

    def page_model(self) -> PageModel:
        delta = self.profile.delta
        if self.page.kind == "disk":
            return PageModel.disk(delta, self.page.radius)
        return PageModel.annulus(delta, self.page.inner_radius, self.page.outer_radius)

    def open_book(self) -> OpenBookSpec:
        twists = tuple(DehnTwist(t.r_start, t.r_end, t.count) for t in self.twists)
        return OpenBookSpec(
            page=self.page_model(),
            monodromy=Monodromy(twists),
            profile=self.profile.params(),
            epsilon=self.epsilon,
            tau_margin=self.tau_margin,
        )

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Copy with dotted-key overrides (``{"grid.shs_resolution": 60}``), revalidated.

        Raises:
            ConfigError: If an override path does not exist or the result is invalid.
        """
        data = self.model_dump()
        for dotted, value in overrides.items():
            node = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                if not isinstance(node.get(key), dict):
                    raise ConfigError(f"unknown config key {dotted!r}", fields=[dotted])
                node = node[key]
            if leaf not in node:
                raise ConfigError(f"unknown config key {dotted!r}", fields=[dotted])
            node[leaf] = value
        return parse_config(data)


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a config mapping.

    Raises:
        ConfigError: Listing every offending field.
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        fields = []
        messages = []
        for error in exc.errors():
            where = ".".join(str(part) for part in error["loc"]) or "<config>"
            fields.append(where)
            messages.append(f"{where}: {error['msg']}")
        raise ConfigError("invalid config: " + "; ".join(messages), fields=fields) from exc


def bundled_configs() -> List[str]:
    """Names of the configs shipped with the package."""
    return sorted(
        entry.name[: -len(".json")]
        for entry in resources.files(CONFIG_PACKAGE).iterdir()
        if entry.name.endswith(".json")
    )


def load_config(source: Union[str, Path]) -> RunConfig:
    """Load a config from a JSON file path or a bundled config name.

    Raises:
        ConfigError: If the source does not exist, is not JSON or fails validation.

    Examples:
    - A bundled config
        ```python

        >>> load_config("tight-s3-disk").page.kind
        'disk'

        ```
    """
    path = Path(source)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif str(source) in bundled_configs():
        text = resources.files(CONFIG_PACKAGE).joinpath(f"{source}.json").read_text(encoding="utf-8")
    else:
        raise ConfigError(f"no config file or bundled config named {str(source)!r}", fields=["<source>"])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {str(source)!r} is not valid JSON: {exc}", fields=["<source>"]) from exc
    logger.debug("loaded config %s", source)
    return parse_config(data)
