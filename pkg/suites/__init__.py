"""
Suites Package
Verification suites, one per monitored property of the model
"""

from .base import SUITES, MemberResult, SuiteError, SuiteRegistry, SuiteReport, VerificationSuite

__all__ = ['SUITES', 'MemberResult', 'SuiteError', 'SuiteRegistry', 'SuiteReport', 'VerificationSuite']
