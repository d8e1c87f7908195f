from pydantic import BaseModel, ConfigDict
from pydantic_settings import BaseSettings, SettingsConfigDict


class SeekDecodeSettings(BaseSettings):
    model_config = SettingsConfigDict(
        # Automatically pick up the named variables from the environment and
        # strip the SND_ prefix
        env_prefix="SND_",
        # Nested models can have individual fields set via SND_OUTER__INNER
        env_nested_delimiter="__",
        # Rename the env vars to lowercase in pydantic
        case_sensitive=False,
        # Don't allow mutation of the settings object, and allow it to be hashed
        frozen=True,
    )


class StrictBaseModel(BaseModel):
    """
    Frozen BaseModel which rejects unknown fields. Used for every configuration and result record so that a typo in a
    config file is an error rather than a silently ignored key.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
