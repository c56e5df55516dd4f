from pydantic import BaseModel
from typing import Optional


# Response Models
class CommandResponse(BaseModel):
    """Result of one CLI command, printed as JSON on stdout"""
    success: bool
    command: str
    message: Optional[str] = None
    outputs: list[str] = []
    data: Optional[dict] = None
