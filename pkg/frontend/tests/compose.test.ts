import { describe, expect, it } from "vitest";

import { composeQuery } from "../src/compose.js";

// these cases are pinned on the backend too; the two must never drift
describe("composeQuery", () => {
  it("joins text then keywords with comma-space", () => {
    expect(composeQuery("a bowl of apples", ["bowl", "apple"])).toBe("a bowl of apples, bowl, apple");
  });

  it("keywords only when text is empty", () => {
    expect(composeQuery("", ["car", "bus"])).toBe("car, bus");
  });

  it("text only when no keywords", () => {
    expect(composeQuery("caption only", [])).toBe("caption only");
  });

  it("empty on empty", () => {
    expect(composeQuery("", [])).toBe("");
  });

  it("keeps keyword order", () => {
    expect(composeQuery("x", ["cup", "banana", "keyboard"])).toBe("x, cup, banana, keyboard");
  });
});
