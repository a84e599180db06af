from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Any, Dict, List, Optional

from .config import PipelineConfig, merge_config
from .errors import InputError


class ProfileType(Enum):
    """Available configuration profiles."""
    UCF_SPORTS = auto()
    UCF_101 = auto()
    HUMAN_ONLY = auto()
    COVERAGE_ONLY = auto()


@dataclass
class PipelineProfile:
    """
    A named set of configuration values tuned for one kind of footage.

    Attributes:
        id: Profile type
        name: Display name (also accepted by --profile, case-insensitive)
        description: What the profile is meant for
        settings: Nested section values applied on top of the defaults
    """
    id: ProfileType
    name: str
    description: str
    settings: Dict[str, Any] = field(default_factory=dict)

    def apply_to_config(self, config: Optional[PipelineConfig] = None) -> PipelineConfig:
        """
        Apply this profile's settings to a configuration.

        Args:
            config: Configuration to patch (defaults when omitted)

        Returns:
            A new PipelineConfig
        """
        return merge_config(config or PipelineConfig(), self.settings)


# Predefined pipeline profiles
PIPELINE_PROFILES = {
    ProfileType.UCF_SPORTS: PipelineProfile(
        id=ProfileType.UCF_SPORTS,
        name="ucf-sports",
        description=(
            "Short trimmed clips with a single dominant action. "
            "Pool of 50 candidates, up to 12 paths per set."
        ),
        settings={
            "search": {"pool_size": 50},
            "association": {"max_paths": 12},
        },
    ),

    ProfileType.UCF_101: PipelineProfile(
        id=ProfileType.UCF_101,
        name="ucf-101",
        description=(
            "Longer, partly untrimmed videos where an actor's path breaks into "
            "more segments. Larger pool and path sets."
        ),
        settings={
            "search": {"pool_size": 100},
            "association": {"max_paths": 18},
        },
    ),

    ProfileType.HUMAN_ONLY: PipelineProfile(
        id=ProfileType.HUMAN_ONLY,
        name="human-only",
        description=(
            "Actionness from the human detector alone; the motion mixtures "
            "are not needed."
        ),
        settings={
            "scoring": {"lambda_p": 0.0},
        },
    ),

    ProfileType.COVERAGE_ONLY: PipelineProfile(
        id=ProfileType.COVERAGE_ONLY,
        name="coverage-only",
        description=(
            "Association maximizes actionness coverage only, without the "
            "appearance similarity bonus between paths."
        ),
        settings={
            "association": {"use_similarity": False},
        },
    ),
}


def get_profile(profile_type: ProfileType) -> PipelineProfile:
    """Get a pipeline profile by type."""
    return PIPELINE_PROFILES.get(profile_type)


def get_all_profiles() -> List[PipelineProfile]:
    """Get all available pipeline profiles."""
    return list(PIPELINE_PROFILES.values())


def find_profile(name: str) -> PipelineProfile:
    """
    Look up a profile by display name or enum name.

    Raises:
        InputError: if no profile matches
    """
    wanted = name.strip().lower().replace("_", "-")
    for profile_type in ProfileType:
        profile = get_profile(profile_type)
        if wanted in (profile.name, profile_type.name.lower().replace("_", "-")):
            return profile
    names = ", ".join(p.name for p in get_all_profiles())
    raise InputError(f"unknown profile '{name}' (available: {names})")
