from pydantic import BaseModel, ConfigDict


class SecnBaseModel(BaseModel):
    """
    Base model extending Pydantic's BaseModel with the project-wide configuration.
    Unknown fields are rejected so that a misspelled config key fails loudly.
    """

    model_config = ConfigDict(
        extra="forbid",
        validate_assignment=True,
    )


class ArrayModel(BaseModel):
    """
    Base model for containers that hold numpy arrays or tensors.
    These are runtime state, never parsed from files, so arbitrary types are allowed.
    """

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
    )
