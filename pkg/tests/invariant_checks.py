from anondyn.oracle import RunAuditor, audit_view  # noqa: F401
