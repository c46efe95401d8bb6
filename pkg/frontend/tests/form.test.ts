import { describe, expect, it } from "vitest";

import { AnnotationForm, captureTime } from "../src/form.js";

describe("mark capture", () => {
  it("copies the playhead at 0.01 s resolution", () => {
    const form = new AnnotationForm("full");
    form.setStart(3.4712);
    expect(form.startMark).toBe(3.47);
    expect(captureTime(1.006)).toBeCloseTo(1.01, 10);
    expect(captureTime(7.994)).toBeCloseTo(7.99, 10);
  });

  it("swaps marks with a cue when end lands before start", () => {
    const form = new AnnotationForm("full");
    form.setStart(3.0);
    form.setEnd(1.0);
    expect(form.startMark).toBe(1.0);
    expect(form.endMark).toBe(3.0);
    expect(form.marksSwapped).toBe(true);
  });

  it("swaps symmetrically when start lands after end", () => {
    const form = new AnnotationForm("full");
    form.setEnd(2.0);
    form.setStart(5.0);
    expect(form.startMark).toBe(2.0);
    expect(form.endMark).toBe(5.0);
    expect(form.marksSwapped).toBe(true);
  });

  it("clamps marks into the clip bounds", () => {
    const form = new AnnotationForm("full");
    form.setStart(-2.3);
    form.setEnd(17.2);
    expect(form.startMark).toBe(0.0);
    expect(form.endMark).toBe(10.0);
  });
});

describe("validation mirror", () => {
  it("disables submit until the full form is complete", () => {
    const form = new AnnotationForm("full");
    expect(form.canSubmit()).toBe(false);
    form.setDescription("kneading dough");
    form.setStart(2.0);
    form.setEnd(6.0);
    expect(form.canSubmit()).toBe(false); // count still missing
    form.setCount(4);
    expect(form.canSubmit()).toBe(true);
  });

  it("rejects count below two with a hint", () => {
    const form = new AnnotationForm("full");
    form.setDescription("x");
    form.setStart(1.0);
    form.setEnd(2.0);
    form.setCount(1);
    expect(form.canSubmit()).toBe(false);
    expect(form.validationErrors().join(" ")).toContain("at least 2");
  });

  it("requires an answer for validity tasks and nothing else", () => {
    const form = new AnnotationForm("validity");
    expect(form.canSubmit()).toBe(false);
    form.setValidity(false);
    expect(form.canSubmit()).toBe(true);
  });

  it("never emits a segment beyond the clip bounds", () => {
    const form = new AnnotationForm("full");
    form.setDescription("sawing wood");
    form.setCount(3);
    form.setStart(9.0);
    form.setEnd(25.0);
    const payload = form.buildSubmission("t-1").annotation!;
    expect(payload.start_time).toBeGreaterThanOrEqual(0);
    expect(payload.end_time).toBeLessThanOrEqual(10.0);
  });
});

describe("payload building", () => {
  it("maps marks and answers onto the submission shape", () => {
    const form = new AnnotationForm("full");
    form.setDescription("  chopping onions ");
    form.setStart(2.0);
    form.setEnd(6.0);
    form.setCount(4);
    expect(form.buildSubmission("t-9")).toEqual({
      task_id: "t-9",
      annotation: {
        description: "chopping onions",
        start_time: 2.0,
        end_time: 6.0,
        count: 4,
      },
    });
  });

  it("builds a bare validity payload for yes/no tasks", () => {
    const form = new AnnotationForm("validity");
    form.setValidity(true);
    expect(form.buildSubmission("t-2")).toEqual({ task_id: "t-2", validity: true });
  });

  it("refuses to build an invalid submission", () => {
    const form = new AnnotationForm("full");
    expect(() => form.buildSubmission("t-3")).toThrow(/not submittable/);
  });
});

describe("snapshots", () => {
  it("round-trips through snapshot/restore", () => {
    const form = new AnnotationForm("full");
    form.setDescription("brushing");
    form.setStart(1.25);
    form.setEnd(7.5);
    form.setCount(6);
    const copy = new AnnotationForm("full");
    copy.restore(form.snapshot());
    expect(copy.buildSubmission("t")).toEqual(form.buildSubmission("t"));
  });
});
