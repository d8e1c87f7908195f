import enum

import pytest

from seekdecode.util.enum import CaseInsensitiveEnum


def test_case_insensitive_enum() -> None:
    class MyEnum(CaseInsensitiveEnum):
        MY_VALUE = enum.auto()
        other_value = enum.auto()

    assert str(MyEnum("mY_vaLue")) == "my_value"
    assert str(MyEnum("other_value")) == "other_value"
    assert MyEnum("OTHER_VALUE") is MyEnum.other_value


def test_case_insensitive_enum_rejects_unknown() -> None:
    class MyEnum(CaseInsensitiveEnum):
        SND_JD = "snd_jd"

    with pytest.raises(ValueError):
        MyEnum("snd-jd")
    with pytest.raises(ValueError):
        MyEnum(3)
