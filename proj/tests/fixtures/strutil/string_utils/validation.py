# -*- coding: utf-8 -*-

from typing import Any

from ._regex import *
from .errors import InvalidInputError


def is_string(obj: Any) -> bool:
    """
    Checks if an object is a string.

    *Example:*

    >>> is_string('foo') # returns true
    >>> is_string(b'foo') # returns false

    :param obj: Object to test.
    :return: True if string, false otherwise.
    """
    return isinstance(obj, str)


def is_full_string(input_string: Any) -> bool:
    """
    Check if a string is not empty (it must contains at least one non space character).

    *Examples:*

    >>> is_full_string(None) # returns false
    >>> is_full_string('') # returns false
    >>> is_full_string(' ') # returns false
    >>> is_full_string('hello') # returns true

    :param input_string: String to check.
    :type input_string: str
    :return: True if not empty, false otherwise.
    """
    return is_string(input_string) and input_string.strip() != ''


def is_number(input_string: str) -> bool:
    """
    Checks if a string is a valid number.

    :param input_string: String to check
    :type input_string: str
    :return: True if the string represents a number, false otherwise
    """
    if not isinstance(input_string, str):
        raise InvalidInputError(input_string)

    return NUMBER_RE.match(input_string) is not None


def is_integer(input_string: str) -> bool:
    """
    Checks whether the given string represents an integer or not.

    :param input_string: String to check
    :type input_string: str
    :return: True if the string represents an integer, false otherwise
    """
    return is_number(input_string) and '.' not in input_string


def is_camel_case(input_string: Any) -> bool:
    """
    Checks if a string is formatted as camel case.

    A string is considered camel case when:

    - it's composed only by letters ([a-zA-Z]) and optionally numbers ([0-9])
    - it contains both lowercase and uppercase letters
    - it does not start with a number

    *Examples:*

    >>> is_camel_case('MyString') # returns true
    >>> is_camel_case('mystring') # returns false

    :param input_string: String to test.
    :type input_string: str
    :return: True for a camel case string, false otherwise.
    """
    return is_full_string(input_string) and CAMEL_CASE_TEST_RE.match(input_string) is not None


def is_snake_case(input_string: Any, separator: str = '_') -> bool:
    """
    Checks if a string is formatted as "snake case".

    :param input_string: String to test.
    :type input_string: str
    :param separator: String to use as separator.
    :type separator: str
    :return: True for a snake case string, false otherwise.
    """
    if is_full_string(input_string):
        re_map = {
            '_': SNAKE_CASE_TEST_RE,
            '-': SNAKE_CASE_TEST_DASH_RE
        }
        re_template = r'([a-z]+\d*{sign}[a-z\d{sign}]*|{sign}+[a-z\d]+[a-z\d{sign}]*)'
        r = re_map.get(
            separator,
            re.compile(re_template.format(sign=re.escape(separator)), re.IGNORECASE)
        )

        return r.match(input_string) is not None

    return False
